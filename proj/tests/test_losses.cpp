#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ordreg/core.hpp"
#include "ordreg/losses.hpp"
#include "ordreg/random.hpp"

using namespace ordreg;

TEST_CASE("OR-CNN loss") {
  CHECK(or_cnn_loss(TaskProbabilities({0.5}), HardLabel{2}) == doctest::Approx(std::log(2.0)));
  // y = 2, K = 3: targets [1, 0]; -log 0.8 - log 0.7.
  CHECK(or_cnn_loss(TaskProbabilities({0.8, 0.3}), HardLabel{2}) ==
        doctest::Approx(-std::log(0.8) - std::log(0.7)));
  CHECK(or_cnn_loss(TaskProbabilities({0.8, 0.3}), HardLabel{2}) == doctest::Approx(0.5798).epsilon(1e-4));
  const double d = 1e-13;
  CHECK(or_cnn_loss(TaskProbabilities({1 - d, 1 - d, d}), HardLabel{3}) < 1e-10);
}

TEST_CASE("OR-Soft loss") {
  const ProblemSpec spec{4, {}};
  const TaskProbabilities t({0.7, 0.4, 0.1});
  for (int y = 1; y <= 4; ++y) {
    CHECK(or_soft_loss(t, exceedance_from_hard(HardLabel{y}, spec)) == or_cnn_loss(t, HardLabel{y}));
  }
  CHECK(or_soft_loss(TaskProbabilities({0.5}), ExceedanceLabel({0.5})) == doctest::Approx(std::log(2.0)));
  // Minimum over the task probability sits at the target.
  for (double p : {0.3, 0.45, 0.55, 0.7}) {
    CHECK(or_soft_loss(TaskProbabilities({p}), ExceedanceLabel({0.5})) > std::log(2.0));
  }
  // target [2/3, 0], tasks [2/3, 0.1]: hand-evaluated weighted BCE terms.
  const double term1 = -(2.0 / 3.0 * std::log(2.0 / 3.0) + 1.0 / 3.0 * std::log(1.0 / 3.0));
  const double term2 = -std::log(0.9);
  CHECK(or_soft_loss(TaskProbabilities({2.0 / 3.0, 0.1}), ExceedanceLabel({2.0 / 3.0, 0.0})) ==
        doctest::Approx(term1 + term2).epsilon(1e-12));
  CHECK(term1 + term2 == doctest::Approx(0.7419).epsilon(1e-4));
}

TEST_CASE("CE and CE-Soft losses") {
  CHECK(ce_loss(ClassDistribution({1 - 1e-13, 1e-13}), HardLabel{1}) < 1e-10);
  CHECK(ce_loss(ClassDistribution({0.25, 0.25, 0.25, 0.25}), HardLabel{3}) == doctest::Approx(std::log(4.0)));
  CHECK(ce_loss(ClassDistribution({0.25, 0.5, 0.125, 0.125}), HardLabel{1}) == doctest::Approx(1.3863).epsilon(1e-4));

  const ClassDistribution p({0.1, 0.6, 0.3});
  CHECK(ce_soft_loss(p, RatingDistribution({0, 1, 0})) == ce_loss(p, HardLabel{2}));
  const RatingDistribution target({0.2, 0.5, 0.3});
  CHECK(ce_soft_loss(ClassDistribution(target.values()), target) ==
        doctest::Approx(entropy(target.values())));
  CHECK(ce_soft_loss(ClassDistribution({0.9, 0.1}), RatingDistribution({0.5, 0.5})) ==
        doctest::Approx(-0.5 * (std::log(0.9) + std::log(0.1))));
  CHECK(ce_soft_loss(ClassDistribution({0.9, 0.1}), RatingDistribution({0.5, 0.5})) ==
        doctest::Approx(1.2040).epsilon(1e-4));
}

TEST_CASE("CE-Soft is minimized at the target (Gibbs)") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> t(4), q(4);
    double st = 0, sq = 0;
    for (int k = 0; k < 4; ++k) {
      t[k] = rng.uniform(0.01, 1.0);
      q[k] = rng.uniform(0.01, 1.0);
      st += t[k];
      sq += q[k];
    }
    for (int k = 0; k < 4; ++k) {
      t[k] /= st;
      q[k] /= sq;
    }
    const RatingDistribution target(t);
    CHECK(ce_soft_loss(ClassDistribution(q), target) >= ce_soft_loss(ClassDistribution(t), target) - 1e-12);
  }
}

TEST_CASE("CORN subsets and chain rule") {
  // K = 3, single example y = 1: only task 1 with target 0.
  const std::vector<TaskProbabilities> one{TaskProbabilities({0.3, 0.9})};
  CHECK(corn_loss(one, std::vector<HardLabel>{HardLabel{1}}) == doctest::Approx(-std::log(0.7)));
  // y = 3 contributes to both tasks with target 1.
  const std::vector<TaskProbabilities> three{TaskProbabilities({0.8, 0.6})};
  CHECK(corn_loss(three, std::vector<HardLabel>{HardLabel{3}}) ==
        doctest::Approx(-std::log(0.8) - std::log(0.6)));
  // Batch {y=1, y=3}: task 1 averages both, task 2 sees only y=3.
  const std::vector<TaskProbabilities> both{TaskProbabilities({0.3, 0.9}), TaskProbabilities({0.8, 0.6})};
  const std::vector<HardLabel> ys{HardLabel{1}, HardLabel{3}};
  const double task1 = 0.5 * (-std::log(0.7) - std::log(0.8));
  const double task2 = -std::log(0.6);
  CHECK(corn_loss(both, ys) == doctest::Approx(task1 + task2));
  CHECK(corn_loss(both, ys, Reduction::Sum) ==
        doctest::Approx(-std::log(0.7) - std::log(0.8) - std::log(0.6)));

  const auto u = corn_unconditional(TaskProbabilities({0.8, 0.5}));
  CHECK(u[0] == doctest::Approx(0.8));
  CHECK(u[1] == doctest::Approx(0.4));
  CHECK(corn_unconditional(TaskProbabilities({1.0, 1.0, 1.0})).values() == std::vector<double>{1, 1, 1});
}

TEST_CASE("CORN unconditional output never triggers clamping") {
  Rng rng(8);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> c(1 + rng.below(6));
    for (double& v : c) v = rng.uniform(1e-6, 1.0);
    const auto u = corn_unconditional(TaskProbabilities(c));
    CHECK(u.is_rank_consistent());
    bool clamped = true;
    class_distribution_from_tasks(u, &clamped);
    CHECK_FALSE(clamped);
  }
}

TEST_CASE("SORD loss") {
  const ProblemSpec spec{4, {}};
  const auto label = sord_soft_label(HardLabel{2}, spec, SordDistance::Absolute);
  CHECK(sord_loss(ClassDistribution(label.values()), HardLabel{2}, spec, SordDistance::Absolute) ==
        doctest::Approx(entropy(label.values())));
  CHECK(sord_loss(ClassDistribution({0.25, 0.25, 0.25, 0.25}), HardLabel{2}, spec,
                  SordDistance::Absolute) == doctest::Approx(std::log(4.0)));
  const ProblemSpec two{2, {}};
  const double w = 1.0 / (1.0 + std::exp(-1.0));
  CHECK(sord_loss(ClassDistribution({0.7, 0.3}), HardLabel{1}, two, SordDistance::Squared) ==
        doctest::Approx(-(w * std::log(0.7) + (1 - w) * std::log(0.3))));
}

TEST_CASE("losses are non-negative and batch-permutation invariant") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(5));
    std::vector<TaskProbabilities> cond;
    std::vector<HardLabel> ys;
    for (int i = 0; i < 8; ++i) {
      std::vector<double> t(static_cast<std::size_t>(k - 1));
      for (double& v : t) v = rng.uniform(0.01, 0.99);
      cond.emplace_back(t);
      ys.push_back(HardLabel{1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(k)))});
      CHECK(or_cnn_loss(cond.back(), ys.back()) >= 0.0);
    }
    const double a = corn_loss(cond, ys);
    CHECK(a >= 0.0);
    std::reverse(cond.begin(), cond.end());
    std::reverse(ys.begin(), ys.end());
    CHECK(corn_loss(cond, ys) == doctest::Approx(a).epsilon(1e-14));
  }
}

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "ordreg/error.hpp"
#include "ordreg/model.hpp"
#include "support.hpp"

using namespace ordreg;
using ordreg::testing::all_pairings;
using ordreg::testing::gradient_check;
using ordreg::testing::random_instance;

TEST_CASE("parameter layout") {
  EncoderConfig enc{3, {5, 4}, Activation::ReLU};
  const ProblemSpec spec{4, {}};
  const auto soft = init_params(enc, HeadKind::Softmax, spec, 1);
  CHECK(soft.values().size() == (3 * 5 + 5) + (5 * 4 + 4) + (4 * 4 + 4));
  const auto ind = init_params(enc, HeadKind::Independent, spec, 1);
  CHECK(ind.values().size() == (3 * 5 + 5) + (5 * 4 + 4) + (4 * 3 + 3));
  const auto coral = init_params(enc, HeadKind::SharedSlopeBias, spec, 1);
  CHECK(coral.values().size() == (3 * 5 + 5) + (5 * 4 + 4) + (4 + 3));
  CHECK(coral.head_layer().weight.rows == 1);
  CHECK(coral.head_layer().bias.size() == 3);
  CHECK(init_params(enc, HeadKind::Softmax, spec, 1) == soft);
  CHECK_FALSE(init_params(enc, HeadKind::Softmax, spec, 2) == soft);
}

TEST_CASE("initial weights respect the fan-in bound") {
  EncoderConfig enc{16, {9}, Activation::Tanh};
  const auto p = init_params(enc, HeadKind::Independent, ProblemSpec{5, {}}, 99);
  for (const auto& layer : p.layers()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols));
    for (double w : p.view(layer.weight)) CHECK(std::abs(w) <= bound);
    for (double b : p.view(layer.bias)) CHECK(b == 0.0);
  }
}

TEST_CASE("head/loss compatibility") {
  CHECK_THROWS_AS(check_head_for_loss(HeadKind::Softmax, LossKind::OrCnn), InputError);
  CHECK_THROWS_AS(check_head_for_loss(HeadKind::Independent, LossKind::CE), InputError);
  CHECK_THROWS_AS(check_head_for_loss(HeadKind::SharedSlopeBias, LossKind::SordAE), InputError);
  CHECK_NOTHROW(check_head_for_loss(HeadKind::SharedSlopeBias, LossKind::Corn));
}

TEST_CASE("analytic gradients match central differences") {
  Rng rng(2024);
  for (const auto& pairing : all_pairings()) {
    for (Activation act : {Activation::Tanh, Activation::ReLU}) {
      for (Reduction red : {Reduction::Mean, Reduction::Sum}) {
        for (int trial = 0; trial < 20; ++trial) {
          const auto inst = random_instance(rng, pairing, act);
          CAPTURE(loss_name(pairing.loss));
          CAPTURE(head_name(pairing.head));
          CAPTURE(trial);
          CHECK(gradient_check(inst, pairing.loss, red) < 1e-4);
        }
      }
    }
  }
}

TEST_CASE("loss_and_gradient reports the same loss as batch_loss") {
  Rng rng(7);
  for (const auto& pairing : all_pairings()) {
    const auto inst = random_instance(rng, pairing, Activation::Tanh);
    const auto batch = inst.batch();
    CHECK(loss_and_gradient(inst.params, batch, pairing.loss).loss ==
          batch_loss(inst.params, batch, pairing.loss));
  }
}

TEST_CASE("mean reduction gradient is invariant to batch duplication") {
  Rng rng(31);
  for (const auto& pairing : all_pairings()) {
    const auto inst = random_instance(rng, pairing, Activation::Tanh);
    auto batch = inst.batch();
    const auto single = loss_and_gradient(inst.params, batch, pairing.loss);
    const auto single_sum = loss_and_gradient(inst.params, batch, pairing.loss, Reduction::Sum);
    const std::size_t n = batch.size();
    for (std::size_t i = 0; i < n; ++i) batch.push_back(batch[i]);
    const auto doubled = loss_and_gradient(inst.params, batch, pairing.loss);
    const auto doubled_sum = loss_and_gradient(inst.params, batch, pairing.loss, Reduction::Sum);
    CHECK(doubled.loss == doctest::Approx(single.loss).epsilon(1e-12));
    CHECK(doubled_sum.loss == doctest::Approx(2 * single_sum.loss).epsilon(1e-12));
    for (std::size_t i = 0; i < single.gradient.values().size(); ++i) {
      CHECK(doubled.gradient.values()[i] ==
            doctest::Approx(single.gradient.values()[i]).epsilon(1e-10).scale(1e-12));
      CHECK(doubled_sum.gradient.values()[i] ==
            doctest::Approx(2 * single_sum.gradient.values()[i]).epsilon(1e-10).scale(1e-12));
    }
  }
}

TEST_CASE("shared slope head is monotone exactly when its biases are") {
  Rng rng(5);
  EncoderConfig enc{2, {}, Activation::ReLU};
  for (int trial = 0; trial < 2000; ++trial) {
    auto p = init_params(enc, HeadKind::SharedSlopeBias, ProblemSpec{5, {}}, trial);
    for (double& b : p.view(p.head_layer().bias)) b = rng.normal(0.0, 2.0);
    const auto biases = p.view(p.head_layer().bias);
    const bool monotone_biases = std::is_sorted(biases.rbegin(), biases.rend());
    const std::vector<double> x{rng.normal(), rng.normal()};
    const auto logits = forward(p, x);
    CHECK(std::is_sorted(logits.rbegin(), logits.rend()) == monotone_biases);
  }
}

TEST_CASE("CORN prediction chains conditionals") {
  Rng rng(12);
  const auto inst = random_instance(rng, {LossKind::Corn, HeadKind::Independent}, Activation::Tanh);
  const auto pred = predict(inst.params, LossKind::Corn, inst.features[0]);
  REQUIRE(pred.tasks.has_value());
  const auto cond = sigmoid(forward(inst.params, inst.features[0]));
  double running = 1.0;
  for (std::size_t k = 0; k < cond.size(); ++k) {
    running *= cond[k];
    CHECK((*pred.tasks)[k] == doctest::Approx(running).epsilon(1e-14));
  }
  CHECK(pred.tasks->is_rank_consistent());
}

TEST_CASE("Adam matches a hand-rolled update") {
  Rng rng(77);
  const auto inst = random_instance(rng, {LossKind::CE, HeadKind::Softmax}, Activation::Tanh);
  ModelParams params = inst.params;
  AdamState state = AdamState::for_params(params, 1e-3);
  std::vector<double> theta = params.values();
  std::vector<double> m(theta.size(), 0.0), v(theta.size(), 0.0);
  const auto batch = inst.batch();
  for (int t = 1; t <= 25; ++t) {
    const auto g = loss_and_gradient(params, batch, LossKind::CE).gradient;
    if (t == 1) {
      // First step moves every coordinate by lr * g / (|g| + eps).
      ModelParams first = params;
      AdamState fresh = AdamState::for_params(first, 1e-3);
      adam_step(first, g, fresh);
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double gi = g.values()[i];
        CHECK(params.values()[i] - first.values()[i] ==
              doctest::Approx(1e-3 * gi / (std::abs(gi) + 1e-8)).epsilon(1e-9));
      }
    }
    adam_step(params, g, state);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = g.values()[i];
      m[i] = 0.9 * m[i] + 0.1 * gi;
      v[i] = 0.999 * v[i] + 0.001 * gi * gi;
      const double mh = m[i] / (1 - std::pow(0.9, t));
      const double vh = v[i] / (1 - std::pow(0.999, t));
      theta[i] -= 1e-3 * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  CHECK(state.step == 25);
  for (std::size_t i = 0; i < theta.size(); ++i) CHECK(params.values()[i] == doctest::Approx(theta[i]).epsilon(1e-12));
}

TEST_CASE("Adam defaults") {
  const ModelParams p = init_params(EncoderConfig{2, {}, Activation::ReLU}, HeadKind::Softmax,
                                    ProblemSpec{3, {}}, 0);
  const auto s = AdamState::for_params(p);
  CHECK(s.lr == 1e-5);
  CHECK(s.beta1 == 0.9);
  CHECK(s.beta2 == 0.999);
  CHECK(s.epsilon == 1e-8);
}

TEST_CASE("training steps reduce the loss") {
  Rng rng(4);
  for (const auto& pairing : all_pairings()) {
    const auto inst = random_instance(rng, pairing, Activation::Tanh);
    ModelParams params = inst.params;
    AdamState state = AdamState::for_params(params, 1e-2);
    const auto batch = inst.batch();
    const double before = batch_loss(params, batch, pairing.loss);
    for (int i = 0; i < 200; ++i) {
      adam_step(params, loss_and_gradient(params, batch, pairing.loss).gradient, state);
    }
    CHECK(batch_loss(params, batch, pairing.loss) < before);
  }
}

TEST_CASE("ensemble average") {
  const std::vector<ClassDistribution> d{ClassDistribution({0.2, 0.8}), ClassDistribution({0.6, 0.4})};
  const auto avg = ensemble_average(d);
  CHECK(avg[0] == doctest::Approx(0.4));
  CHECK(avg[1] == doctest::Approx(0.6));
  CHECK(ensemble_average(std::span(d).first(1)) == d[0]);
  CHECK_THROWS_AS(ensemble_average(std::span<const ClassDistribution>{}), InputError);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  Rng rng(9);
  for (const auto& pairing : all_pairings()) {
    const auto inst = random_instance(rng, pairing, Activation::ReLU);
    const auto text = params_to_json(inst.params);
    const auto back = params_from_json(text);
    CHECK(back == inst.params);
    CHECK(params_to_json(back) == text);
  }
  const auto dir = std::filesystem::temp_directory_path() / "ordreg_test_ckpt";
  std::filesystem::remove_all(dir);
  const auto inst = random_instance(rng, {LossKind::CE, HeadKind::Softmax}, Activation::Tanh);
  save_params(inst.params, (dir / "p.json").string());
  CHECK(load_params((dir / "p.json").string()) == inst.params);
  std::filesystem::remove_all(dir);

  CHECK_THROWS_AS(params_from_json("{\"format\": \"other\"}"), InputError);
  CHECK_THROWS(params_from_json("not json"));
}

TEST_CASE("bad encoder configs are rejected") {
  CHECK_THROWS_AS(EncoderConfig({0, {}, Activation::ReLU}).validate(), InputError);
  CHECK_THROWS_AS(EncoderConfig({3, {4, 0}, Activation::ReLU}).validate(), InputError);
}

TEST_CASE("forward on hand-set parameters") {
  const ProblemSpec spec{4, {}};
  EncoderConfig enc{2, {}, Activation::ReLU};
  auto coral = init_params(enc, HeadKind::SharedSlopeBias, spec, 0);
  std::fill(coral.values().begin(), coral.values().end(), 0.0);
  const std::vector<double> biases{1.0, 0.0, -1.0};
  std::copy(biases.begin(), biases.end(), coral.view(coral.head_layer().bias).begin());
  const std::vector<double> x{0.3, -0.7};
  const auto tasks = sigmoid(forward(coral, x));
  CHECK(tasks[0] == doctest::Approx(0.731).epsilon(1e-3));
  CHECK(tasks[1] == 0.5);
  CHECK(tasks[2] == doctest::Approx(0.269).epsilon(1e-3));

  auto soft = init_params(enc, HeadKind::Softmax, spec, 0);
  std::fill(soft.values().begin(), soft.values().end(), 0.0);
  for (double p : softmax(forward(soft, x))) CHECK(p == 0.25);
  auto ind = init_params(enc, HeadKind::Independent, spec, 0);
  std::fill(ind.values().begin(), ind.values().end(), 0.0);
  for (double p : sigmoid(forward(ind, x))) CHECK(p == 0.5);

  CHECK(coral.layers().size() == 1);
  CHECK_THROWS_AS(forward(coral, std::vector<double>{1.0}), InputError);
}

TEST_CASE("gradient vanishes at a saturated optimum") {
  const ProblemSpec spec{3, {}};
  EncoderConfig enc{1, {}, Activation::ReLU};
  auto p = init_params(enc, HeadKind::Independent, spec, 0);
  std::fill(p.values().begin(), p.values().end(), 0.0);
  const std::vector<double> logits{20.0, -20.0};
  std::copy(logits.begin(), logits.end(), p.view(p.head_layer().bias).begin());
  const std::vector<double> x{1.0};
  const std::vector<BatchItem> batch{{x, HardLabel{2}}};
  const auto g = loss_and_gradient(p, batch, LossKind::OrCnn).gradient;
  double norm = 0.0;
  for (double v : g.values()) norm += v * v;
  CHECK(std::sqrt(norm) < 1e-3);
}

TEST_CASE("zero gradient leaves parameters unchanged") {
  const auto p = init_params(EncoderConfig{3, {4}, Activation::Tanh}, HeadKind::Softmax,
                             ProblemSpec{3, {}}, 4);
  ModelParams q = p;
  AdamState s = AdamState::for_params(q);
  adam_step(q, q.zeros_like(), s);
  CHECK(q == p);
  CHECK(s.step == 1);
}

TEST_CASE("incompatible targets are rejected") {
  Rng rng(1);
  const auto inst = random_instance(rng, {LossKind::CESoft, HeadKind::Softmax}, Activation::Tanh);
  const std::vector<BatchItem> batch{{inst.features[0], HardLabel{1}}};
  CHECK_THROWS_AS(batch_loss(inst.params, batch, LossKind::CESoft), InputError);
}

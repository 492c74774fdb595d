#include <doctest.h>

#include <cmath>
#include <vector>

#include "ordreg/error.hpp"
#include "ordreg/metrics.hpp"
#include "support.hpp"

using namespace ordreg;
using ordreg::testing::brute_force_qwk;
using ordreg::testing::random_soft;
using ordreg::testing::t_cdf_by_integration;

namespace {

EvalRecord rec(std::vector<double> soft, std::vector<double> pred, int pred_hard) {
  return EvalRecord::make(RatingDistribution(std::move(soft)), ClassDistribution(std::move(pred)),
                          HardLabel{pred_hard});
}

EvalRecord onehot(int k, int y, int pred) {
  std::vector<double> s(static_cast<std::size_t>(k), 0.0), p(static_cast<std::size_t>(k), 0.0);
  s[static_cast<std::size_t>(y - 1)] = 1.0;
  p[static_cast<std::size_t>(pred - 1)] = 1.0;
  return rec(s, p, pred);
}

std::vector<EvalRecord> random_records(Rng& rng, int k, int n, bool oracle) {
  std::vector<EvalRecord> out;
  for (int i = 0; i < n; ++i) {
    const auto soft = random_soft(rng, k);
    const auto pred = oracle ? soft : random_soft(rng, k);
    const ClassDistribution dist(pred.values());
    out.push_back(EvalRecord::make(soft, dist, decode_argmax(dist)));
  }
  return out;
}

}  // namespace

TEST_CASE("record derivations") {
  const auto r = rec({0, 2.0 / 3.0, 1.0 / 3.0, 0}, {0.1, 0.6, 0.2, 0.1}, 2);
  CHECK(r.hard == HardLabel{2});
  CHECK(r.weight == doctest::Approx(2.0 / 3.0));
  CHECK(r.rater_classes == std::vector<int>{2, 3});
  CHECK(r.confidence() == doctest::Approx(0.6));
}

TEST_CASE("weighted metric mean") {
  const std::vector<EvalRecord> rs{rec({0, 1, 0}, {0, 1, 0}, 2), rec({0.5, 0.25, 0.25}, {0, 0, 1}, 3)};
  CHECK(rs[1].weight == 0.5);
  CHECK(mae(rs, true) == doctest::Approx(1.0 / 1.5));
  CHECK(mae(rs, false) == doctest::Approx(1.0));
  const std::vector<EvalRecord> correct{rec({0, 1, 0}, {0, 1, 0}, 2), rec({0.5, 0.3, 0.2}, {1, 0, 0}, 1)};
  CHECK(accuracy(correct, true) == 1.0);
  CHECK_THROWS_AS(mae(std::span<const EvalRecord>{}, true), InputError);
}

TEST_CASE("QWK examples") {
  const std::vector<int> a{1, 2, 3, 4}, rev{4, 3, 2, 1};
  const std::vector<double> w(4, 1.0);
  CHECK(*quadratic_weighted_kappa(a, a, w, 4) == 1.0);
  CHECK(*quadratic_weighted_kappa(a, rev, w, 4) == -1.0);
  const std::vector<int> same{2, 2, 2};
  CHECK_FALSE(quadratic_weighted_kappa(same, same, std::vector<double>(3, 1.0), 4).has_value());
  const std::vector<double> half(4, 0.5);
  CHECK(*quadratic_weighted_kappa(a, rev, half, 4) == -1.0);
}

TEST_CASE("QWK matches brute force") {
  Rng rng(100);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(5));
    const int n = 2 + static_cast<int>(rng.below(30));
    std::vector<int> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = 1 + static_cast<int>(rng.below(k));
      b[i] = 1 + static_cast<int>(rng.below(k));
    }
    const auto got = quadratic_weighted_kappa(a, b, std::vector<double>(n, 1.0), k);
    if (!got) continue;
    ++checked;
    CHECK(std::abs(*got - brute_force_qwk(a, b, k)) <= 1e-10);
  }
  CHECK(checked >= 100);
}

TEST_CASE("any-rater accuracy") {
  CHECK(any_rater_accuracy(std::vector{rec({1. / 3, 1. / 3, 1. / 3, 0}, {0, 1, 0, 0}, 2)}) == 1.0);
  CHECK(any_rater_accuracy(std::vector{rec({1. / 3, 1. / 3, 1. / 3, 0}, {0, 0, 0, 1}, 4)}) == 0.0);
  Rng rng(4);
  std::vector<EvalRecord> rs;
  for (int i = 0; i < 50; ++i) {
    rs.push_back(onehot(4, 1 + static_cast<int>(rng.below(4)), 1 + static_cast<int>(rng.below(4))));
  }
  CHECK(any_rater_accuracy(rs) == accuracy(rs, false));
}

TEST_CASE("ECE examples") {
  Rng rng(55);
  for (int trial = 0; trial < 100; ++trial) {
    const auto rs = random_records(rng, 2 + static_cast<int>(rng.below(5)), 20, true);
    CHECK(ece(rs, 10) == 0.0);
  }
  CHECK(ece(std::vector{rec({0.5, 0.5, 0}, {0.9, 0.05, 0.05}, 1)}, 1) == doctest::Approx(0.4));
  CHECK(ece(std::vector{onehot(3, 2, 2), onehot(3, 1, 1)}, 10) == 0.0);
}

TEST_CASE("calibration bins") {
  const std::vector<EvalRecord> rs{rec({0, 1}, {0.45, 0.55}, 2), rec({1, 0}, {0.95, 0.05}, 1),
                                   rec({0, 1}, {0.0, 1.0}, 2), rec({1, 0}, {0.4, 0.6}, 2)};
  const auto bins = calibration_curve(rs, 10);
  REQUIRE(bins.size() == 10);
  CHECK(bins[5].count == 2);  // 0.55 and 0.6 -> ceil(c*10)-1 = 5
  CHECK(bins[5].mean_accuracy == doctest::Approx(0.5));
  CHECK(bins[9].count == 2);  // 0.95 and 1.0
  CHECK(bins[0].count == 0);
  CHECK(bins[5].lower == doctest::Approx(0.5));
  CHECK(bins[5].upper == doctest::Approx(0.6));
  const double expected = (2.0 / 4) * std::abs(0.575 - 0.5) + (2.0 / 4) * std::abs(0.975 - 1.0);
  CHECK(ece(rs, 10) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("AURC examples") {
  const std::vector<EvalRecord> good{rec({1, 0}, {0.9, 0.1}, 1), rec({1, 0}, {0.4, 0.6}, 2)};
  CHECK(aurc(good) == doctest::Approx(0.25));
  const auto curve = risk_coverage(good);
  REQUIRE(curve.size() == 2);
  CHECK(curve[0].coverage == 0.5);
  CHECK(curve[0].risk == 0.0);
  CHECK(curve[1].risk == 0.5);
  const std::vector<EvalRecord> bad{rec({0, 1}, {0.9, 0.1}, 1), rec({0, 1}, {0.4, 0.6}, 2)};
  CHECK(aurc(bad) == doctest::Approx(0.75));
  CHECK(aurc(std::vector{onehot(3, 1, 1), onehot(3, 3, 3)}) == 0.0);
}

TEST_CASE("Brier and cross entropy") {
  const std::vector<EvalRecord> half{rec({1, 0}, {0.5, 0.5}, 1)};
  CHECK(brier(half) == doctest::Approx(0.5));
  CHECK(cross_entropy_metric(half) == doctest::Approx(std::log(2.0)));
  CHECK(brier(std::vector{onehot(3, 1, 2)}) == doctest::Approx(2.0));
  const std::vector<EvalRecord> oracle{rec({0.2, 0.8}, {0.2, 0.8}, 2)};
  CHECK(brier(oracle) == 0.0);
  CHECK(cross_entropy_metric(oracle) ==
        doctest::Approx(-(0.2 * std::log(0.2) + 0.8 * std::log(0.8))));
}

TEST_CASE("coverage error, AUROC and Spearman") {
  std::vector<EvalRecord> top;
  top.push_back(onehot(3, 2, 2));
  top.push_back(rec({0, 0, 1}, {0.1, 0.2, 0.7}, 3));
  CHECK(coverage_error(top) == 1.0);
  CHECK(coverage_error(std::vector{rec({0.5, 0, 0.5}, {0.6, 0.3, 0.1}, 1)}) == 3.0);

  const std::vector<EvalRecord> sep{rec({1, 0}, {0.9, 0.1}, 1), rec({1, 0}, {0.7, 0.3}, 1),
                                    rec({0, 1}, {0.2, 0.8}, 2), rec({0, 1}, {0.4, 0.6}, 2)};
  CHECK(*auroc_macro(sep) == 1.0);
  CHECK(*spearman(sep) == doctest::Approx(1.0));
  const std::vector<EvalRecord> one_class{onehot(3, 1, 1), onehot(3, 1, 2)};
  CHECK_FALSE(auroc_macro(one_class).has_value());
  CHECK_FALSE(spearman(one_class).has_value());
}

TEST_CASE("confusion matrix") {
  const auto cm = confusion_matrix(std::vector{onehot(3, 1, 1), onehot(3, 3, 3)}, true);
  CHECK(cm.cells[0] == std::vector<double>{1, 0, 0});
  CHECK(cm.cells[1] == std::vector<double>{0, 0, 0});
  CHECK(cm.absent_rows[1]);
  CHECK(cm.cells[2] == std::vector<double>{0, 0, 1});
  const auto one = confusion_matrix(std::vector{onehot(3, 2, 3)}, false);
  CHECK(one.cells[1][2] == 1.0);
}

TEST_CASE("UW metrics reduce to unweighted ones at unit weights") {
  Rng rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<EvalRecord> rs;
    const int k = 2 + static_cast<int>(rng.below(5));
    for (int i = 0; i < 25; ++i) {
      const int y = 1 + static_cast<int>(rng.below(k));
      auto r = onehot(k, y, 1 + static_cast<int>(rng.below(k)));
      rs.push_back(r);
    }
    const auto report = compute_report(rs, 10);
    CHECK(*report.at("mae_uw") == *report.at("mae"));
    CHECK(*report.at("accuracy_uw") == *report.at("accuracy"));
    CHECK(report.at("qwk_uw") == report.at("qwk"));
  }
}

TEST_CASE("report has every metric") {
  Rng rng(1);
  const auto report = compute_report(random_records(rng, 4, 40, false), 10);
  for (const auto& name : metric_names()) CHECK(report.count(name) == 1);
  CHECK(report.size() == metric_names().size());
}

TEST_CASE("paired t-test") {
  const std::vector<double> zeros(5, 0.0), ones(5, 1.0);
  CHECK(paired_t_test_one_sided(ones, zeros, Direction::Greater) == 0.0);
  CHECK(paired_t_test_one_sided(ones, zeros, Direction::Lower) == 1.0);
  CHECK(paired_t_test_one_sided(zeros, zeros, Direction::Greater) == 0.5);

  const std::vector<double> d{0.3, -0.1, 0.2, 0.1, 0.0};
  double mean = 0.0;
  for (double v : d) mean += v / 5.0;
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double t = mean / std::sqrt(ss / 4.0 / 5.0);
  const double p = paired_t_test_one_sided(d, zeros, Direction::Greater);
  CHECK(std::abs(p - (1.0 - t_cdf_by_integration(t, 4.0))) < 1e-6);
  CHECK(std::abs(paired_t_test_one_sided(d, zeros, Direction::Lower) - t_cdf_by_integration(t, 4.0)) < 1e-6);
  CHECK_THROWS_AS(paired_t_test_one_sided(d, std::vector<double>(4, 0.0), Direction::Greater), InputError);
}

TEST_CASE("t CDF matches numerical integration") {
  for (double dof : {1.0, 2.0, 4.0, 9.0, 30.0}) {
    for (double t : {-3.0, -1.2, -0.1, 0.0, 0.4, 1.7, 5.0}) {
      CHECK(std::abs(student_t_cdf(t, dof) - t_cdf_by_integration(t, dof)) < 1e-8);
    }
  }
  CHECK(incomplete_beta(2.0, 3.0, 0.0) == 0.0);
  CHECK(incomplete_beta(2.0, 3.0, 1.0) == 1.0);
  // I_x(1, 1) = x
  CHECK(incomplete_beta(1.0, 1.0, 0.37) == doctest::Approx(0.37).epsilon(1e-12));
}

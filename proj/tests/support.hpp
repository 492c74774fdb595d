#pragma once

// Shared fixtures for the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ordreg/core.hpp"
#include "ordreg/losses.hpp"
#include "ordreg/model.hpp"
#include "ordreg/random.hpp"

namespace ordreg::testing {

struct Pairing {
  LossKind loss;
  HeadKind head;
};

inline std::vector<Pairing> all_pairings() {
  std::vector<Pairing> out;
  for (LossKind loss : {LossKind::OrCnn, LossKind::OrSoft, LossKind::Corn}) {
    out.push_back({loss, HeadKind::Independent});
    out.push_back({loss, HeadKind::SharedSlopeBias});
  }
  for (LossKind loss : {LossKind::CE, LossKind::CESoft, LossKind::SordAE, LossKind::SordSE}) {
    out.push_back({loss, HeadKind::Softmax});
  }
  return out;
}

inline RatingDistribution random_soft(Rng& rng, int k) {
  std::vector<double> p(static_cast<std::size_t>(k));
  double total = 0.0;
  for (double& v : p) {
    v = rng.uniform() < 0.4 ? 0.0 : rng.uniform(0.05, 1.0);
    total += v;
  }
  if (total == 0.0) {
    p[rng.below(static_cast<std::uint64_t>(k))] = 1.0;
    total = 1.0;
  }
  for (double& v : p) v /= total;
  return RatingDistribution(std::move(p));
}

inline Target make_target(LossKind loss, const RatingDistribution& soft) {
  switch (loss) {
    case LossKind::CESoft:
      return soft;
    case LossKind::OrSoft:
      return exceedance_from_soft(soft);
    default:
      return std::get<HardLabel>(hard_label_from_soft(soft, TiePolicy::LowestClass));
  }
}

/// A small random problem: features, targets and parameters.
struct Instance {
  std::vector<std::vector<double>> features;
  std::vector<Target> targets;
  ModelParams params;

  std::vector<BatchItem> batch() const {
    std::vector<BatchItem> out;
    for (std::size_t i = 0; i < features.size(); ++i) out.push_back({features[i], targets[i]});
    return out;
  }
};

inline Instance random_instance(Rng& rng, Pairing pairing, Activation activation) {
  const int k = 2 + static_cast<int>(rng.below(4));
  const int dim = 1 + static_cast<int>(rng.below(4));
  EncoderConfig enc;
  enc.input_dim = dim;
  enc.activation = activation;
  const int depth = static_cast<int>(rng.below(3));
  for (int l = 0; l < depth; ++l) enc.hidden_dims.push_back(2 + static_cast<int>(rng.below(4)));
  Instance inst;
  inst.params = init_params(enc, pairing.head, ProblemSpec{k, {}}, rng.below(1u << 30));
  for (double& v : inst.params.values()) v += rng.normal(0.0, 0.3);
  const int n = 1 + static_cast<int>(rng.below(6));
  for (int i = 0; i < n; ++i) {
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (double& v : x) v = rng.normal();
    inst.features.push_back(std::move(x));
    inst.targets.push_back(make_target(pairing.loss, random_soft(rng, k)));
  }
  return inst;
}

/// Largest relative error between the analytic gradient and central
/// differences, over all coordinates.
inline double gradient_check(const Instance& inst, LossKind loss, Reduction reduction,
                             double step = 1e-6) {
  const auto batch = inst.batch();
  const auto analytic = loss_and_gradient(inst.params, batch, loss, reduction).gradient;
  ModelParams probe = inst.params;
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.values().size(); ++i) {
    const double saved = probe.values()[i];
    probe.values()[i] = saved + step;
    const double up = batch_loss(probe, batch, loss, reduction);
    probe.values()[i] = saved - step;
    const double down = batch_loss(probe, batch, loss, reduction);
    probe.values()[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic.values()[i];
    const double scale = std::max({std::abs(a), std::abs(numeric), 1e-4});
    worst = std::max(worst, std::abs(a - numeric) / scale);
  }
  return worst;
}

/// Brute-force quadratic weighted kappa straight from the contingency-table
/// formula, with unit weights.
inline double brute_force_qwk(const std::vector<int>& a, const std::vector<int>& b, int k) {
  std::vector<std::vector<double>> o(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) o[a[i] - 1][b[i] - 1] += 1.0;
  const double n = static_cast<double>(a.size());
  double num = 0.0, den = 0.0;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      double row = 0.0, col = 0.0;
      for (int t = 0; t < k; ++t) {
        row += o[i][t];
        col += o[t][j];
      }
      const double w = static_cast<double>((i - j) * (i - j)) / ((k - 1) * (k - 1));
      num += w * o[i][j] / n;
      den += w * (row / n) * (col / n);
    }
  }
  return 1.0 - num / den;
}

/// Student-t CDF by composite Simpson integration of the density.
inline double t_cdf_by_integration(double t, double dof) {
  const double c = std::exp(std::lgamma((dof + 1) / 2) - std::lgamma(dof / 2)) /
                   std::sqrt(dof * 3.14159265358979323846);
  auto pdf = [&](double x) { return c * std::pow(1.0 + x * x / dof, -(dof + 1) / 2); };
  const double x = std::abs(t);
  const int n = 200000;
  const double h = x / n;
  double s = pdf(0.0) + pdf(x);
  for (int i = 1; i < n; ++i) s += pdf(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  const double half = s * h / 3.0;
  return t >= 0 ? 0.5 + half : 0.5 - half;
}

}  // namespace ordreg::testing

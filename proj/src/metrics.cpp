#include "ordreg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ordreg/error.hpp"
#include "ordreg/losses.hpp"

namespace ordreg {

namespace {

void require_records(std::span<const EvalRecord> records, const char* what) {
  if (records.empty()) throw InputError(std::string(what) + ": no records");
}

std::size_t bin_index(double confidence, int num_bins) {
  const double scaled = std::ceil(confidence * num_bins) - 1.0;
  return static_cast<std::size_t>(std::clamp(scaled, 0.0, static_cast<double>(num_bins - 1)));
}

// Average (mid) ranks, 1-based.
std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t m = i; m < j; ++m) ranks[order[m]] = mid;
    i = j;
  }
  return ranks;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

// Continued fraction for the incomplete beta (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

EvalRecord EvalRecord::make(RatingDistribution soft, ClassDistribution pred_dist,
                            HardLabel pred_hard) {
  if (soft.size() != pred_dist.size()) throw InputError("eval record: class count mismatch");
  check_label(pred_hard, soft.num_classes());
  const HardLabel hard = mode_lowest(soft);
  const double weight = soft.prob(hard);
  std::vector<int> raters;
  for (std::size_t k = 0; k < soft.size(); ++k) {
    if (soft[k] > 0.0) raters.push_back(static_cast<int>(k) + 1);
  }
  return EvalRecord{std::move(soft), hard, std::move(pred_dist), pred_hard, weight,
                    std::move(raters)};
}

double EvalRecord::confidence() const {
  return *std::max_element(pred_dist.begin(), pred_dist.end());
}

bool EvalRecord::rater_hit() const {
  return std::find(rater_classes.begin(), rater_classes.end(), pred_hard.value) !=
         rater_classes.end();
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {
      "mae_uw",   "mae",         "qwk_uw", "qwk",   "accuracy_uw",    "accuracy",
      "accuracy_ar", "ece",      "aurc",   "brier", "cross_entropy", "coverage_error",
      "auc",      "spearman"};
  return names;
}

double weighted_metric_mean(std::span<const EvalRecord> records,
                            const std::function<double(const EvalRecord&)>& metric,
                            bool use_weights) {
  require_records(records, "weighted_metric_mean");
  double num = 0.0;
  double den = 0.0;
  for (const auto& r : records) {
    const double w = use_weights ? r.weight : 1.0;
    num += w * metric(r);
    den += w;
  }
  return num / den;
}

double mae(std::span<const EvalRecord> records, bool use_weights) {
  return weighted_metric_mean(
      records, [](const EvalRecord& r) { return std::abs(r.pred_hard.value - r.hard.value); },
      use_weights);
}

double accuracy(std::span<const EvalRecord> records, bool use_weights) {
  return weighted_metric_mean(
      records, [](const EvalRecord& r) { return r.pred_hard == r.hard ? 1.0 : 0.0; },
      use_weights);
}

std::optional<double> quadratic_weighted_kappa(std::span<const int> labels,
                                               std::span<const int> preds,
                                               std::span<const double> weights, int num_classes) {
  if (labels.size() != preds.size() || labels.size() != weights.size()) {
    throw InputError("qwk: input length mismatch");
  }
  if (labels.empty()) throw InputError("qwk: no pairs");
  const auto k = static_cast<std::size_t>(num_classes);
  std::vector<double> observed(k * k, 0.0);
  double mass = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    check_label(HardLabel{labels[i]}, num_classes);
    check_label(HardLabel{preds[i]}, num_classes);
    observed[static_cast<std::size_t>(labels[i] - 1) * k + static_cast<std::size_t>(preds[i] - 1)] +=
        weights[i];
    mass += weights[i];
  }
  for (double& o : observed) o /= mass;
  std::vector<double> row(k, 0.0), col(k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      row[a] += observed[a * k + b];
      col[b] += observed[a * k + b];
    }
  }
  const double scale = static_cast<double>((k - 1) * (k - 1));
  double disagree_obs = 0.0;
  double disagree_exp = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      const double d = static_cast<double>(a) - static_cast<double>(b);
      const double w = d * d / scale;
      disagree_obs += w * observed[a * k + b];
      disagree_exp += w * row[a] * col[b];
    }
  }
  if (disagree_exp == 0.0) return std::nullopt;
  return 1.0 - disagree_obs / disagree_exp;
}

std::optional<double> qwk(std::span<const EvalRecord> records, bool use_weights) {
  require_records(records, "qwk");
  std::vector<int> labels, preds;
  std::vector<double> weights;
  for (const auto& r : records) {
    labels.push_back(r.hard.value);
    preds.push_back(r.pred_hard.value);
    weights.push_back(use_weights ? r.weight : 1.0);
  }
  return quadratic_weighted_kappa(labels, preds, weights, records.front().num_classes());
}

double any_rater_accuracy(std::span<const EvalRecord> records) {
  return weighted_metric_mean(
      records, [](const EvalRecord& r) { return r.rater_hit() ? 1.0 : 0.0; }, false);
}

std::vector<CalibrationBin> calibration_curve(std::span<const EvalRecord> records, int num_bins) {
  if (num_bins < 1) throw InputError("calibration needs at least one bin");
  const auto bins = static_cast<std::size_t>(num_bins);
  std::vector<CalibrationBin> out(bins);
  std::vector<double> conf_sum(bins, 0.0), acc_sum(bins, 0.0);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].lower = static_cast<double>(b) / num_bins;
    out[b].upper = static_cast<double>(b + 1) / num_bins;
  }
  for (const auto& r : records) {
    const double c = r.confidence();
    const std::size_t b = bin_index(c, num_bins);
    conf_sum[b] += c;
    acc_sum[b] += r.soft.prob(r.pred_hard);
    ++out[b].count;
  }
  for (std::size_t b = 0; b < bins; ++b) {
    if (out[b].count == 0) continue;
    out[b].mean_confidence = conf_sum[b] / static_cast<double>(out[b].count);
    out[b].mean_accuracy = acc_sum[b] / static_cast<double>(out[b].count);
  }
  return out;
}

double ece(std::span<const EvalRecord> records, int num_bins) {
  require_records(records, "ece");
  const auto n = static_cast<double>(records.size());
  double total = 0.0;
  for (const auto& bin : calibration_curve(records, num_bins)) {
    if (bin.count == 0) continue;
    total += static_cast<double>(bin.count) / n * std::abs(bin.mean_confidence - bin.mean_accuracy);
  }
  return total;
}

std::vector<RiskCoveragePoint> risk_coverage(std::span<const EvalRecord> records) {
  require_records(records, "risk_coverage");
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> conf(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) conf[i] = records[i].confidence();
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return conf[a] > conf[b]; });
  std::vector<RiskCoveragePoint> points;
  points.reserve(records.size());
  double correct_weight = 0.0;
  double total_weight = 0.0;
  const auto n = static_cast<double>(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& r = records[order[i]];
    total_weight += r.weight;
    if (r.pred_hard == r.hard) correct_weight += r.weight;
    points.push_back({static_cast<double>(i + 1) / n, 1.0 - correct_weight / total_weight});
  }
  return points;
}

double aurc(std::span<const EvalRecord> records) {
  const auto points = risk_coverage(records);
  double total = 0.0;
  for (const auto& p : points) total += p.risk;
  return total / static_cast<double>(points.size());
}

double brier(std::span<const EvalRecord> records) {
  return weighted_metric_mean(
      records,
      [](const EvalRecord& r) {
        double s = 0.0;
        for (std::size_t k = 0; k < r.soft.size(); ++k) {
          const double d = r.pred_dist[k] - r.soft[k];
          s += d * d;
        }
        return s;
      },
      false);
}

double cross_entropy_metric(std::span<const EvalRecord> records) {
  return weighted_metric_mean(
      records, [](const EvalRecord& r) { return ce_soft_loss(r.pred_dist, r.soft); }, false);
}

double coverage_error(std::span<const EvalRecord> records) {
  return weighted_metric_mean(
      records,
      [](const EvalRecord& r) {
        int worst = 0;
        for (int c : r.rater_classes) {
          const double score = r.pred_dist.prob(HardLabel{c});
          const auto rank = std::count_if(r.pred_dist.begin(), r.pred_dist.end(),
                                          [&](double p) { return p >= score; });
          worst = std::max(worst, static_cast<int>(rank));
        }
        return static_cast<double>(worst);
      },
      false);
}

std::optional<double> auroc_macro(std::span<const EvalRecord> records) {
  require_records(records, "auroc_macro");
  const int k_classes = records.front().num_classes();
  double total = 0.0;
  int used = 0;
  std::vector<double> scores(records.size());
  for (int k = 1; k <= k_classes; ++k) {
    std::size_t positives = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      scores[i] = records[i].pred_dist.prob(HardLabel{k});
      if (records[i].hard.value == k) ++positives;
    }
    const std::size_t negatives = records.size() - positives;
    if (positives == 0 || negatives == 0) continue;
    const auto ranks = average_ranks(scores);
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (records[i].hard.value == k) rank_sum += ranks[i];
    }
    const auto np = static_cast<double>(positives);
    const auto nn = static_cast<double>(negatives);
    total += (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
    ++used;
  }
  if (used == 0) return std::nullopt;
  return total / used;
}

std::optional<double> spearman(std::span<const EvalRecord> records) {
  require_records(records, "spearman");
  std::vector<double> pred(records.size()), truth(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    pred[i] = records[i].pred_hard.value;
    truth[i] = records[i].hard.value;
  }
  return pearson(average_ranks(pred), average_ranks(truth));
}

ConfusionMatrix confusion_matrix(std::span<const EvalRecord> records, bool row_normalize) {
  require_records(records, "confusion_matrix");
  ConfusionMatrix cm;
  cm.num_classes = records.front().num_classes();
  const auto k = static_cast<std::size_t>(cm.num_classes);
  cm.cells.assign(k, std::vector<double>(k, 0.0));
  for (const auto& r : records) {
    cm.cells[static_cast<std::size_t>(r.hard.value - 1)][static_cast<std::size_t>(r.pred_hard.value - 1)] += 1.0;
  }
  cm.absent_rows.assign(k, false);
  for (std::size_t a = 0; a < k; ++a) {
    const double total = std::accumulate(cm.cells[a].begin(), cm.cells[a].end(), 0.0);
    if (total == 0.0) {
      cm.absent_rows[a] = true;
      continue;
    }
    if (row_normalize) {
      for (double& v : cm.cells[a]) v /= total;
    }
  }
  return cm;
}

MetricReport compute_report(std::span<const EvalRecord> records, int ece_bins) {
  require_records(records, "compute_report");
  MetricReport report;
  report["mae_uw"] = mae(records, true);
  report["mae"] = mae(records, false);
  report["qwk_uw"] = qwk(records, true);
  report["qwk"] = qwk(records, false);
  report["accuracy_uw"] = accuracy(records, true);
  report["accuracy"] = accuracy(records, false);
  report["accuracy_ar"] = any_rater_accuracy(records);
  report["ece"] = ece(records, ece_bins);
  report["aurc"] = aurc(records);
  report["brier"] = brier(records);
  report["cross_entropy"] = cross_entropy_metric(records);
  report["coverage_error"] = coverage_error(records);
  report["auc"] = auroc_macro(records);
  report["spearman"] = spearman(records);
  return report;
}

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double dof) {
  if (!(dof > 0.0)) throw InputError("student_t_cdf: dof must be positive");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double x = dof / (dof + t * t);
  const double tail = 0.5 * incomplete_beta(0.5 * dof, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

double paired_t_test_one_sided(std::span<const double> a, std::span<const double> b,
                               Direction direction) {
  if (a.size() != b.size()) throw InputError("paired t-test: lengths differ");
  if (a.size() < 2) throw InputError("paired t-test: need at least 2 pairs");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const double sign = direction == Direction::Greater ? 1.0 : -1.0;
  if (sd == 0.0) {
    if (mean == 0.0) return 0.5;
    return sign * mean > 0.0 ? 0.0 : 1.0;
  }
  const double t = mean / (sd / std::sqrt(static_cast<double>(n)));
  // P(T >= t) for "greater", P(T <= t) for "lower".
  return student_t_cdf(-sign * t, static_cast<double>(n - 1));
}

}  // namespace ordreg

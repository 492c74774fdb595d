#pragma once

// Evaluation over EvalRecords. "UW" metrics weight each example by the
// share of annotators who chose its mode.

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ordreg/core.hpp"

namespace ordreg {

struct EvalRecord {
  RatingDistribution soft;
  HardLabel hard;
  ClassDistribution pred_dist;
  HardLabel pred_hard;
  double weight = 1.0;            // share of annotators choosing the mode
  std::vector<int> rater_classes;  // classes with nonzero soft probability

  /// Derives hard (lowest-class mode), weight and rater classes from `soft`.
  static EvalRecord make(RatingDistribution soft, ClassDistribution pred_dist, HardLabel pred_hard);

  int num_classes() const { return soft.num_classes(); }
  double confidence() const;
  bool rater_hit() const;
};

/// Metric name -> value; std::nullopt marks an undefined metric.
using MetricReport = std::map<std::string, std::optional<double>>;

/// Names in report order.
const std::vector<std::string>& metric_names();

double weighted_metric_mean(std::span<const EvalRecord> records,
                            const std::function<double(const EvalRecord&)>& metric,
                            bool use_weights);

double mae(std::span<const EvalRecord> records, bool use_weights);
double accuracy(std::span<const EvalRecord> records, bool use_weights);

/// Quadratic weighted kappa over paired labels in 1..K with per-pair
/// weights accumulated into the contingency table. Undefined when the
/// expected disagreement is zero.
std::optional<double> quadratic_weighted_kappa(std::span<const int> labels,
                                               std::span<const int> preds,
                                               std::span<const double> weights, int num_classes);

std::optional<double> qwk(std::span<const EvalRecord> records, bool use_weights);

double any_rater_accuracy(std::span<const EvalRecord> records);

struct CalibrationBin {
  double lower = 0.0;
  double upper = 0.0;
  double mean_confidence = 0.0;
  double mean_accuracy = 0.0;
  std::size_t count = 0;
};

/// Equal-width bins over (0,1]; a confidence c goes to bin ceil(c*B)-1.
/// Empty bins are reported with count 0.
std::vector<CalibrationBin> calibration_curve(std::span<const EvalRecord> records, int num_bins);

/// Count-weighted gap between confidence and soft-label accuracy per bin.
double ece(std::span<const EvalRecord> records, int num_bins = 10);

struct RiskCoveragePoint {
  double coverage = 0.0;
  double risk = 0.0;
};

/// Records sorted by confidence (descending, stable); risk at coverage n/N
/// is the UW error rate of the top n.
std::vector<RiskCoveragePoint> risk_coverage(std::span<const EvalRecord> records);
double aurc(std::span<const EvalRecord> records);

double brier(std::span<const EvalRecord> records);
double cross_entropy_metric(std::span<const EvalRecord> records);

/// Mean over records of the worst rank (ties counted pessimistically)
/// of any rater class when classes are ordered by predicted probability.
double coverage_error(std::span<const EvalRecord> records);

/// Macro one-vs-rest AUROC against hard labels; classes with no positive
/// or no negative example are skipped. Undefined if none remain.
std::optional<double> auroc_macro(std::span<const EvalRecord> records);

/// Spearman correlation between pred_hard and hard with average ranks.
std::optional<double> spearman(std::span<const EvalRecord> records);

struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<std::vector<double>> cells;  // [true-1][pred-1]
  std::vector<bool> absent_rows;           // true class never observed
};

ConfusionMatrix confusion_matrix(std::span<const EvalRecord> records, bool row_normalize);

/// Every metric in metric_names(); `ece_bins` sets the ECE bin count.
MetricReport compute_report(std::span<const EvalRecord> records, int ece_bins = 10);

enum class Direction { Greater, Lower };

/// One-sided paired t-test on d = a - b. Direction::Greater tests a > b,
/// Direction::Lower tests a < b.
double paired_t_test_one_sided(std::span<const double> a, std::span<const double> b,
                               Direction direction);

/// Student-t CDF with `dof` degrees of freedom.
double student_t_cdf(double t, double dof);

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

}  // namespace ordreg

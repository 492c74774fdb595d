#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ordreg/data.hpp"
#include "ordreg/metrics.hpp"
#include "ordreg/model.hpp"

namespace ordreg {

/// A loss bound to the head it trains.
struct Method {
  std::string name;
  LossKind loss;
  HeadKind head;
};

/// ce, ce_soft, or_cnn, or_soft, coral, coral_soft, corn, sord_ae, sord_se.
const std::vector<Method>& all_methods();
Method method_from_name(std::string_view name);
std::string valid_method_names();

enum class DecodeRule { Count, Argmax };

struct TrainConfig {
  Method method = all_methods().front();
  int epochs = 1000;
  int batch_size = 16;
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<int> hidden_dims;  // encoder input_dim comes from the data
  Activation activation = Activation::ReLU;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::optional<DecodeRule> decode;  // default: count for task heads, argmax for softmax
  TieHandling ties = TieHandling::ExcludeEvalResampleTrain;
  double train_fraction = 0.8;
  int ece_bins = 10;

  DecodeRule decode_rule() const;
  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_mae_uw = 0.0;
};

struct TrainingHistory {
  std::uint64_t seed = 0;
  std::vector<EpochStats> epochs;
  int best_epoch = 0;
  double best_val_mae_uw = 0.0;
};

struct TrainedModel {
  ModelParams params;
  TrainingHistory history;
};

/// Trains for config.epochs and returns the snapshot with the lowest
/// validation UW-MAE (earliest on ties). Throws TrainingDiverged on a
/// non-finite loss.
TrainedModel train_one(const Dataset& dataset, const TrainConfig& config, std::uint64_t seed,
                       std::span<const std::size_t> train, std::span<const std::size_t> val,
                       const std::vector<TieAnnotation>& ties);

/// Ensemble predictions for `indices` turned into EvalRecords; examples
/// excluded by the tie policy are skipped. `ids` receives the example ids
/// of the returned records.
std::vector<EvalRecord> evaluate_models(const Dataset& dataset,
                                        std::span<const ModelParams> models,
                                        const TrainConfig& config,
                                        std::span<const std::size_t> indices,
                                        const std::vector<TieAnnotation>& ties,
                                        std::vector<std::string>* ids = nullptr);

struct FoldResult {
  int fold = 0;
  bool failed = false;
  std::string error;
  std::vector<EvalRecord> records;
  std::vector<std::string> record_ids;
  MetricReport report;
  std::vector<TrainingHistory> histories;  // one per seed, seed order
};

struct MetricSummary {
  double mean = 0.0;
  std::optional<double> std;  // n-1 denominator; undefined for n < 2
  int n = 0;
};

struct ExperimentResult {
  std::string method;
  std::vector<FoldResult> folds;
  std::map<std::string, std::optional<MetricSummary>> summary;
  bool partial = false;

  /// Per-fold values of one metric, in fold order (nullopt: failed/undefined).
  std::vector<std::optional<double>> fold_values(const std::string& metric) const;
};

std::map<std::string, std::optional<MetricSummary>> summarize(const std::vector<FoldResult>& folds);

/// k-fold cross-validation with |seeds| models per fold ensembled on the
/// test fold. Training jobs run on up to `jobs` threads; the result does
/// not depend on `jobs`.
ExperimentResult run_cv(const Dataset& dataset, const TrainConfig& config, int k,
                        std::uint64_t split_seed, int jobs = 1);

inline constexpr double kSignificanceLevel = 0.05;

struct ComparisonReport {
  std::string method_a;
  std::string method_b;
  std::string metric;
  Direction direction = Direction::Lower;
  double p_value = 0.5;
  bool significant = false;
  int folds = 0;
  double mean_a = 0.0;
  double mean_b = 0.0;

  /// e.g. "or_soft achieves significantly lower ece than corn (p = 0.025)".
  std::string sentence() const;
};

ComparisonReport compare_fold_values(const std::string& method_a,
                                     const std::vector<std::optional<double>>& a,
                                     const std::string& method_b,
                                     const std::vector<std::optional<double>>& b,
                                     const std::string& metric, Direction direction);

ComparisonReport compare_methods(const ExperimentResult& a, const ExperimentResult& b,
                                 const std::string& metric, Direction direction);

}  // namespace ordreg

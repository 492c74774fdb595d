#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <utility>
#include <vector>

#include "ordreg/core.hpp"

namespace ordreg {

struct Example {
  std::string id;
  std::vector<double> features;
  std::vector<HardLabel> votes;
};

/// Examples with per-example soft, mode and exceedance labels derived from
/// the votes at construction. Immutable afterwards.
class Dataset {
 public:
  Dataset(ProblemSpec spec, std::vector<Example> examples);

  const ProblemSpec& spec() const { return spec_; }
  int num_classes() const { return spec_.num_classes; }
  std::size_t size() const { return examples_.size(); }
  std::size_t feature_dim() const { return feature_dim_; }

  const Example& example(std::size_t i) const { return examples_[i]; }
  const std::vector<Example>& examples() const { return examples_; }
  const RatingDistribution& soft(std::size_t i) const { return soft_[i]; }
  const ExceedanceLabel& exceedance(std::size_t i) const { return exceedance_[i]; }
  /// Mode with exact ties reported.
  const ModeResult& mode(std::size_t i) const { return mode_[i]; }
  /// Mode under the lowest-class policy (used for stratification).
  HardLabel hard(std::size_t i) const { return mode_lowest(soft_[i]); }

 private:
  ProblemSpec spec_;
  std::vector<Example> examples_;
  std::size_t feature_dim_ = 0;
  std::vector<RatingDistribution> soft_;
  std::vector<ExceedanceLabel> exceedance_;
  std::vector<ModeResult> mode_;
};

// ---------------------------------------------------------------------------
// Synthetic multi-rater data

/// Latent-threshold generator: z ~ N(0,1), features = w z + noise, and
/// each rater re-thresholds z + N(0, rater_noise_sd).
struct SyntheticConfig {
  int n_examples = 500;
  int n_features = 8;
  int num_classes = 4;
  int n_raters = 3;
  std::vector<double> thresholds;  // K-1 strictly increasing; empty = defaults
  double feature_noise_sd = 0.0;
  double rater_noise_sd = 0.0;
  std::uint64_t seed = 0;

  /// Fills default thresholds and throws InputError on invalid settings.
  void validate();
};

/// Default cut points: standard-normal quantiles at k/K, so the true
/// classes are balanced.
std::vector<double> default_thresholds(int num_classes);

Dataset generate_synthetic(SyntheticConfig config);

/// The per-seed feature projection w used by generate_synthetic.
std::vector<double> synthetic_projection(const SyntheticConfig& config);

/// Mean over rater pairs of the unweighted QWK between their votes, using
/// examples where both raters voted. Undefined pairs are skipped; returns
/// NaN when no pair is defined.
double mean_pairwise_rater_qwk(const Dataset& dataset);

// ---------------------------------------------------------------------------
// CSV ingestion

/// Column conventions: optional `id`; features `f_*`; votes `r_*`
/// (1..K, blank = missing rater) or per-class counts `c_1..c_K`.
struct CsvSchema {
  int num_classes = 0;  // 0: infer from the count columns or the largest vote
  std::vector<std::string> feature_columns;  // empty: every f_* column
  std::vector<std::string> vote_columns;     // empty: every r_* column
  std::string id_column = "id";
};

Dataset load_csv(const std::string& path, const CsvSchema& schema = {});
Dataset parse_csv(std::istream& in, const CsvSchema& schema = {});

/// Writes id, f_*, r_* columns (one vote column per rater slot).
std::string dataset_to_csv(const Dataset& dataset);

// ---------------------------------------------------------------------------
// Rater sets, ties and splits

/// Multi-rater base votes are concatenated with `extra`; a single
/// consensus base vote is first repeated `replication_factor` times.
std::vector<HardLabel> combine_rater_sets(const std::vector<HardLabel>& base,
                                          const std::vector<HardLabel>& extra,
                                          int replication_factor);

enum class TieHandling {
  ExcludeEvalResampleTrain,  // tied modes skipped in evaluation, resampled per epoch
  LowestClass,               // ties resolved to the lowest tied class everywhere
};

struct TieAnnotation {
  bool tied = false;
  std::vector<int> classes;  // tied classes when tied
};

std::vector<TieAnnotation> resolve_ties(const Dataset& dataset, TieHandling handling);

/// Hard training label for one epoch. Untied examples return their mode;
/// tied ones draw uniformly among the tied classes from an RNG keyed by
/// (seed, epoch, example) under ExcludeEvalResampleTrain, or the lowest
/// class otherwise.
HardLabel training_label(const Dataset& dataset, const std::vector<TieAnnotation>& ties,
                         TieHandling handling, std::size_t example, std::uint64_t seed, int epoch);

/// True when the example belongs in evaluation records.
bool include_in_evaluation(const std::vector<TieAnnotation>& ties, TieHandling handling,
                           std::size_t example);

struct FoldSplit {
  std::vector<std::vector<std::size_t>> test_folds;  // sorted indices per fold

  std::size_t num_folds() const { return test_folds.size(); }
  /// Complement of test fold `fold`, ascending.
  std::vector<std::size_t> train_indices(std::size_t fold, std::size_t dataset_size) const;
};

/// Per-class shuffle, then a round-robin deal that continues across classes.
/// Logs a warning when k exceeds the smallest class count.
FoldSplit stratified_k_fold(const Dataset& dataset, int k, std::uint64_t seed);

/// Stratified by hard label; per class, round(fraction * n) go to train.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> train_val_split(
    const Dataset& dataset, const std::vector<std::size_t>& indices, double fraction,
    std::uint64_t seed);

}  // namespace ordreg

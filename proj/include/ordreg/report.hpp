#pragma once

// File formats for experiment outputs:
//   results/<method>/fold_<i>/{metrics.json, records.csv, history.csv}
//   results/<method>/{calibration.csv, risk_coverage.csv, confusion.csv}
//   results/{summary.json, tradeoff.csv, comparisons.json}

#include <string>
#include <vector>

#include <json.hpp>

#include "ordreg/harness.hpp"
#include "ordreg/metrics.hpp"

namespace ordreg {

using Json = nlohmann::json;

/// {"ece_bins": B, "metrics": {name: value|null}, "num_records": N}
std::string metrics_json(const MetricReport& report, std::size_t num_records, int ece_bins);
MetricReport metrics_from_json(const std::string& text);

/// Columns: id,hard,pred_hard,weight,soft_1..soft_K,pred_1..pred_K.
std::string records_to_csv(const std::vector<EvalRecord>& records,
                           const std::vector<std::string>& ids);
std::vector<EvalRecord> records_from_csv(const std::string& text,
                                         std::vector<std::string>* ids = nullptr);

std::string history_to_csv(const std::vector<TrainingHistory>& histories);
std::string calibration_to_csv(const std::vector<CalibrationBin>& bins);
std::string risk_coverage_to_csv(const std::vector<RiskCoveragePoint>& points);
std::string confusion_to_csv(const ConfusionMatrix& cm);

/// Per-method mean/std table. `meta` holds the only non-deterministic fields.
Json summary_json(const std::vector<ExperimentResult>& results, const Json& config,
                  const Json& meta);

/// method,fold,mae_uw,ece for every completed fold.
std::string tradeoff_to_csv(const std::vector<ExperimentResult>& results);

Json comparison_json(const ComparisonReport& report);

/// Curve files for a record set written into `dir`.
void write_curves(const std::string& dir, const std::vector<EvalRecord>& records, int ece_bins);

/// Writes the full results tree for a cross-validation run.
void write_experiment(const std::string& out_dir, const std::vector<ExperimentResult>& results,
                      const Json& config, int ece_bins,
                      const std::vector<ComparisonReport>& comparisons);

/// Reads fold_<i>/metrics.json files under a method results directory, in
/// fold order.
std::vector<MetricReport> read_fold_reports(const std::string& method_dir);

}  // namespace ordreg

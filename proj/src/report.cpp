#include "ordreg/report.hpp"

#include <chrono>
#include <filesystem>
#include <sstream>

#include "ordreg/error.hpp"
#include "ordreg/io.hpp"

namespace ordreg {

namespace fs = std::filesystem;

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

double parse_double_field(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError("records line " + std::to_string(line) + ": bad number '" + s + "'");
  }
}

}  // namespace

std::string metrics_json(const MetricReport& report, std::size_t num_records, int ece_bins) {
  Json metrics = Json::object();
  for (const auto& [name, value] : report) metrics[name] = optional_number(value);
  Json j;
  j["ece_bins"] = ece_bins;
  j["metrics"] = metrics;
  j["num_records"] = num_records;
  return j.dump(2) + "\n";
}

MetricReport metrics_from_json(const std::string& text) {
  const Json j = Json::parse(text);
  MetricReport out;
  for (const auto& [name, value] : j.at("metrics").items()) {
    out[name] = value.is_null() ? std::nullopt : std::optional<double>(value.get<double>());
  }
  return out;
}

std::string records_to_csv(const std::vector<EvalRecord>& records,
                           const std::vector<std::string>& ids) {
  if (ids.size() != records.size()) throw InputError("records_to_csv: ids/records mismatch");
  std::ostringstream out;
  const int k = records.empty() ? 0 : records.front().num_classes();
  out << "id,hard,pred_hard,weight";
  for (int c = 1; c <= k; ++c) out << ",soft_" << c;
  for (int c = 1; c <= k; ++c) out << ",pred_" << c;
  out << '\n';
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    out << ids[i] << ',' << r.hard.value << ',' << r.pred_hard.value << ','
        << format_double(r.weight);
    for (double v : r.soft) out << ',' << format_double(v);
    for (double v : r.pred_dist) out << ',' << format_double(v);
    out << '\n';
  }
  return out.str();
}

std::vector<EvalRecord> records_from_csv(const std::string& text, std::vector<std::string>* ids) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InputError("records CSV is empty");
  const auto header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "id" || header[1] != "hard" || header[2] != "pred_hard" ||
      header[3] != "weight" || (header.size() - 4) % 2 != 0) {
    throw InputError("records CSV header must be id,hard,pred_hard,weight,soft_*,pred_*");
  }
  const std::size_t k = (header.size() - 4) / 2;
  std::vector<EvalRecord> records;
  if (ids != nullptr) ids->clear();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw InputError("records line " + std::to_string(line_no) + ": wrong field count");
    }
    std::vector<double> soft(k), pred(k);
    for (std::size_t c = 0; c < k; ++c) {
      soft[c] = parse_double_field(f[4 + c], line_no);
      pred[c] = parse_double_field(f[4 + k + c], line_no);
    }
    const HardLabel pred_hard{static_cast<int>(parse_double_field(f[2], line_no))};
    auto record = EvalRecord::make(RatingDistribution(std::move(soft)),
                                   ClassDistribution(std::move(pred)), pred_hard);
    if (record.hard.value != static_cast<int>(parse_double_field(f[1], line_no))) {
      throw InputError("records line " + std::to_string(line_no) +
                       ": hard label disagrees with the soft label mode");
    }
    records.push_back(std::move(record));
    if (ids != nullptr) ids->push_back(f[0]);
  }
  if (records.empty()) throw InputError("records CSV has no rows");
  return records;
}

std::string history_to_csv(const std::vector<TrainingHistory>& histories) {
  std::ostringstream out;
  out << "seed,epoch,train_loss,val_mae_uw,best\n";
  for (const auto& h : histories) {
    for (const auto& e : h.epochs) {
      out << h.seed << ',' << e.epoch << ',' << format_double(e.train_loss) << ','
          << format_double(e.val_mae_uw) << ',' << (e.epoch == h.best_epoch ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

std::string calibration_to_csv(const std::vector<CalibrationBin>& bins) {
  std::ostringstream out;
  out << "bin_lower,bin_upper,mean_confidence,mean_accuracy,count\n";
  for (const auto& b : bins) {
    out << format_double(b.lower) << ',' << format_double(b.upper) << ','
        << format_double(b.mean_confidence) << ',' << format_double(b.mean_accuracy) << ','
        << b.count << '\n';
  }
  return out.str();
}

std::string risk_coverage_to_csv(const std::vector<RiskCoveragePoint>& points) {
  std::ostringstream out;
  out << "coverage,risk\n";
  for (const auto& p : points) out << format_double(p.coverage) << ',' << format_double(p.risk) << '\n';
  return out.str();
}

std::string confusion_to_csv(const ConfusionMatrix& cm) {
  std::ostringstream out;
  out << "true_class";
  for (int c = 1; c <= cm.num_classes; ++c) out << ",pred_" << c;
  out << ",absent\n";
  for (std::size_t a = 0; a < cm.cells.size(); ++a) {
    out << a + 1;
    for (double v : cm.cells[a]) out << ',' << format_double(v);
    out << ',' << (cm.absent_rows[a] ? 1 : 0) << '\n';
  }
  return out.str();
}

Json summary_json(const std::vector<ExperimentResult>& results, const Json& config,
                  const Json& meta) {
  Json methods = Json::object();
  for (const auto& r : results) {
    Json metrics = Json::object();
    for (const auto& [name, s] : r.summary) {
      if (!s) {
        metrics[name] = nullptr;
        continue;
      }
      metrics[name] = Json{{"mean", s->mean}, {"std", optional_number(s->std)}, {"n", s->n}};
    }
    Json failed = Json::array();
    for (const auto& f : r.folds) {
      if (f.failed) failed.push_back(Json{{"fold", f.fold}, {"error", f.error}});
    }
    methods[r.method] = Json{{"folds", r.folds.size()},
                             {"failed_folds", failed},
                             {"partial", r.partial},
                             {"metrics", metrics}};
  }
  Json j;
  j["config"] = config;
  j["meta"] = meta;
  j["methods"] = methods;
  j["notes"] = Json{
      {"coverage_error", "relevant set = every class chosen by at least one rater"},
      {"auc", "macro one-vs-rest AUROC against the mode label"},
      {"qwk_uw", "rater-agreement weights accumulated into the contingency table"}};
  return j;
}

std::string tradeoff_to_csv(const std::vector<ExperimentResult>& results) {
  std::ostringstream out;
  out << "method,fold,mae_uw,ece\n";
  for (const auto& r : results) {
    for (const auto& f : r.folds) {
      if (f.failed) continue;
      out << r.method << ',' << f.fold << ',' << format_double(*f.report.at("mae_uw")) << ','
          << format_double(*f.report.at("ece")) << '\n';
    }
  }
  return out.str();
}

Json comparison_json(const ComparisonReport& report) {
  return Json{{"method_a", report.method_a},
              {"method_b", report.method_b},
              {"metric", report.metric},
              {"direction", report.direction == Direction::Lower ? "lower" : "greater"},
              {"p_value", report.p_value},
              {"alpha", kSignificanceLevel},
              {"significant", report.significant},
              {"folds", report.folds},
              {"mean_a", report.mean_a},
              {"mean_b", report.mean_b},
              {"summary", report.sentence()}};
}

void write_curves(const std::string& dir, const std::vector<EvalRecord>& records, int ece_bins) {
  const fs::path base(dir);
  write_file_atomic((base / "calibration.csv").string(),
                    calibration_to_csv(calibration_curve(records, ece_bins)));
  write_file_atomic((base / "risk_coverage.csv").string(),
                    risk_coverage_to_csv(risk_coverage(records)));
  write_file_atomic((base / "confusion.csv").string(),
                    confusion_to_csv(confusion_matrix(records, true)));
}

void write_experiment(const std::string& out_dir, const std::vector<ExperimentResult>& results,
                      const Json& config, int ece_bins,
                      const std::vector<ComparisonReport>& comparisons) {
  const fs::path base(out_dir);
  for (const auto& r : results) {
    const fs::path method_dir = base / r.method;
    std::vector<EvalRecord> pooled;
    for (const auto& f : r.folds) {
      const fs::path fold_dir = method_dir / ("fold_" + std::to_string(f.fold));
      write_file_atomic((fold_dir / "history.csv").string(), history_to_csv(f.histories));
      if (f.failed) continue;
      write_file_atomic((fold_dir / "metrics.json").string(),
                        metrics_json(f.report, f.records.size(), ece_bins));
      write_file_atomic((fold_dir / "records.csv").string(),
                        records_to_csv(f.records, f.record_ids));
      pooled.insert(pooled.end(), f.records.begin(), f.records.end());
    }
    if (!pooled.empty()) write_curves(method_dir.string(), pooled, ece_bins);
  }

  const auto now = std::chrono::system_clock::now();
  const Json meta{{"generated_at_unix",
                   std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count()},
                  {"tool", "ordreg"}};
  write_file_atomic((base / "summary.json").string(),
                    summary_json(results, config, meta).dump(2) + "\n");
  write_file_atomic((base / "tradeoff.csv").string(), tradeoff_to_csv(results));
  if (!comparisons.empty()) {
    Json arr = Json::array();
    for (const auto& c : comparisons) arr.push_back(comparison_json(c));
    write_file_atomic((base / "comparisons.json").string(), arr.dump(2) + "\n");
  }
}

std::vector<MetricReport> read_fold_reports(const std::string& method_dir) {
  const fs::path base(method_dir);
  if (!fs::is_directory(base)) throw InputError("not a results directory: " + method_dir);
  std::vector<MetricReport> out;
  for (int f = 0;; ++f) {
    const fs::path fold_dir = base / ("fold_" + std::to_string(f));
    if (!fs::is_directory(fold_dir)) break;
    const fs::path metrics = fold_dir / "metrics.json";
    if (!fs::exists(metrics)) {
      out.push_back({});  // failed fold
      continue;
    }
    out.push_back(metrics_from_json(read_file(metrics.string())));
  }
  if (out.empty()) throw InputError("no fold_<i> directories under " + method_dir);
  return out;
}

}  // namespace ordreg

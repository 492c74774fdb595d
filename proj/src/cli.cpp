#include "ordreg/cli.hpp"

#include <filesystem>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "ordreg/data.hpp"
#include "ordreg/error.hpp"
#include "ordreg/harness.hpp"
#include "ordreg/io.hpp"
#include "ordreg/log.hpp"
#include "ordreg/random.hpp"
#include "ordreg/report.hpp"

namespace ordreg::cli {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::string data;
  std::string methods;
  std::string out;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::optional<int> folds;
  std::string decode;
  std::string ties;
  std::optional<int> classes;
  std::optional<int> bins;
  // compare
  std::string dir_a;
  std::string dir_b;
  std::string metric;
  std::string direction = "lower";
};

[[noreturn]] void field_error(const std::string& field, const std::string& message) {
  throw InputError("config field '" + field + "': " + message);
}

// Typed read of an optional config key; type errors name the field.
template <class T>
void read_field(const Json& obj, const std::string& key, const std::string& path, T& target) {
  if (!obj.contains(key)) return;
  try {
    target = obj.at(key).get<T>();
  } catch (const Json::exception&) {
    field_error(path + key, "wrong type");
  }
}

void check_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& path) {
  if (!obj.is_object()) field_error(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) field_error(path + key, "unknown field");
  }
}

Json load_json(const std::string& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw InputError(path + ": invalid JSON: " + e.what());
  }
}

SyntheticConfig parse_synthetic(const Json& j, const std::string& path) {
  check_keys(j,
             {"n_examples", "n_features", "num_classes", "n_raters", "thresholds",
              "feature_noise_sd", "rater_noise_sd", "seed"},
             path);
  SyntheticConfig c;
  read_field(j, "n_examples", path, c.n_examples);
  read_field(j, "n_features", path, c.n_features);
  read_field(j, "num_classes", path, c.num_classes);
  read_field(j, "n_raters", path, c.n_raters);
  read_field(j, "thresholds", path, c.thresholds);
  read_field(j, "feature_noise_sd", path, c.feature_noise_sd);
  read_field(j, "rater_noise_sd", path, c.rater_noise_sd);
  read_field(j, "seed", path, c.seed);
  try {
    c.validate();
  } catch (const InputError& e) {
    field_error(path.empty() ? "<root>" : path.substr(0, path.size() - 1), e.what());
  }
  return c;
}

DecodeRule parse_decode(const std::string& s, const std::string& field) {
  if (s == "count") return DecodeRule::Count;
  if (s == "argmax") return DecodeRule::Argmax;
  field_error(field, "expected 'count' or 'argmax', got '" + s + "'");
}

TieHandling parse_ties(const std::string& s, const std::string& field) {
  if (s == "exclude") return TieHandling::ExcludeEvalResampleTrain;
  if (s == "lowest") return TieHandling::LowestClass;
  field_error(field, "expected 'exclude' or 'lowest', got '" + s + "'");
}

Direction parse_direction(const std::string& s) {
  if (s == "lower") return Direction::Lower;
  if (s == "greater" || s == "higher") return Direction::Greater;
  throw InputError("--direction must be 'lower' or 'greater', got '" + s + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Comparison {
  std::string a, b, metric;
  Direction direction = Direction::Lower;
};

struct Experiment {
  std::optional<SyntheticConfig> synthetic;
  std::string data_path;
  std::optional<int> num_classes;
  std::vector<std::string> methods;
  int folds = 5;
  std::uint64_t split_seed = 0;
  TrainConfig train;  // method filled per run
  std::string out;
  std::vector<Comparison> comparisons;
};

void parse_train_block(const Json& j, TrainConfig& t) {
  const std::string p = "train.";
  check_keys(j,
             {"epochs", "batch_size", "lr", "beta1", "beta2", "epsilon", "hidden_dims",
              "activation", "seeds", "decode", "ties", "train_fraction", "ece_bins"},
             p);
  read_field(j, "epochs", p, t.epochs);
  read_field(j, "batch_size", p, t.batch_size);
  read_field(j, "lr", p, t.lr);
  read_field(j, "beta1", p, t.beta1);
  read_field(j, "beta2", p, t.beta2);
  read_field(j, "epsilon", p, t.epsilon);
  read_field(j, "hidden_dims", p, t.hidden_dims);
  read_field(j, "seeds", p, t.seeds);
  read_field(j, "train_fraction", p, t.train_fraction);
  read_field(j, "ece_bins", p, t.ece_bins);
  std::string s;
  if (j.contains("activation")) {
    read_field(j, "activation", p, s);
    if (s != "relu" && s != "tanh") field_error(p + "activation", "expected 'relu' or 'tanh'");
    t.activation = s == "relu" ? Activation::ReLU : Activation::Tanh;
  }
  if (j.contains("decode")) {
    read_field(j, "decode", p, s);
    t.decode = parse_decode(s, p + "decode");
  }
  if (j.contains("ties")) {
    read_field(j, "ties", p, s);
    t.ties = parse_ties(s, p + "ties");
  }
  try {
    t.validate();
  } catch (const InputError& e) {
    field_error("train", e.what());
  }
  if (!(t.train_fraction > 0.0 && t.train_fraction < 1.0)) {
    field_error(p + "train_fraction", "must lie strictly between 0 and 1");
  }
}

Experiment parse_experiment(const Options& opt) {
  Experiment e;
  if (!opt.config.empty()) {
    const Json j = load_json(opt.config);
    check_keys(j,
               {"data", "synthetic", "num_classes", "methods", "folds", "split_seed", "train",
                "comparisons", "out"},
               "");
    read_field(j, "data", "", e.data_path);
    if (j.contains("synthetic")) e.synthetic = parse_synthetic(j.at("synthetic"), "synthetic.");
    int k = 0;
    read_field(j, "num_classes", "", k);
    if (j.contains("num_classes")) e.num_classes = k;
    read_field(j, "methods", "", e.methods);
    read_field(j, "folds", "", e.folds);
    read_field(j, "split_seed", "", e.split_seed);
    read_field(j, "out", "", e.out);
    if (j.contains("train")) parse_train_block(j.at("train"), e.train);
    if (j.contains("comparisons")) {
      if (!j.at("comparisons").is_array()) field_error("comparisons", "expected an array");
      for (std::size_t i = 0; i < j.at("comparisons").size(); ++i) {
        const auto& c = j.at("comparisons")[i];
        const std::string p = "comparisons[" + std::to_string(i) + "].";
        check_keys(c, {"a", "b", "metric", "direction"}, p);
        Comparison cmp;
        std::string dir = "lower";
        read_field(c, "a", p, cmp.a);
        read_field(c, "b", p, cmp.b);
        read_field(c, "metric", p, cmp.metric);
        read_field(c, "direction", p, dir);
        try {
          cmp.direction = parse_direction(dir);
        } catch (const InputError&) {
          field_error(p + "direction", "expected 'lower' or 'greater'");
        }
        e.comparisons.push_back(cmp);
      }
    }
  }
  if (!opt.data.empty()) {
    e.data_path = opt.data;
    e.synthetic.reset();
  }
  if (!opt.methods.empty()) e.methods = split_list(opt.methods);
  if (!opt.out.empty()) e.out = opt.out;
  if (opt.folds) e.folds = *opt.folds;
  if (opt.classes) e.num_classes = *opt.classes;
  if (!opt.decode.empty()) e.train.decode = parse_decode(opt.decode, "--decode");
  if (!opt.ties.empty()) e.train.ties = parse_ties(opt.ties, "--ties");
  if (opt.seed) {
    for (std::size_t i = 0; i < e.train.seeds.size(); ++i) e.train.seeds[i] = *opt.seed + i;
    e.split_seed = *opt.seed;
    if (e.synthetic) e.synthetic->seed = *opt.seed;
  }

  if (e.data_path.empty() && !e.synthetic) {
    throw InputError("no dataset: pass --data or set 'data'/'synthetic' in the config");
  }
  if (e.methods.empty()) throw InputError("no methods: pass --methods or set 'methods'");
  for (const auto& m : e.methods) method_from_name(m);
  if (e.out.empty()) throw InputError("no output directory: pass --out or set 'out'");
  if (e.folds < 2) field_error("folds", "must be >= 2");
  for (const auto& c : e.comparisons) {
    method_from_name(c.a);
    method_from_name(c.b);
    if (std::find(metric_names().begin(), metric_names().end(), c.metric) == metric_names().end()) {
      throw InputError("config field 'comparisons': unknown metric '" + c.metric + "'");
    }
  }
  return e;
}

Dataset load_dataset(const Experiment& e) {
  if (e.synthetic) return generate_synthetic(*e.synthetic);
  CsvSchema schema;
  if (e.num_classes) schema.num_classes = *e.num_classes;
  return load_csv(e.data_path, schema);
}

Json experiment_json(const Experiment& e) {
  const TrainConfig& t = e.train;
  Json train{{"epochs", t.epochs},
             {"batch_size", t.batch_size},
             {"lr", t.lr},
             {"beta1", t.beta1},
             {"beta2", t.beta2},
             {"epsilon", t.epsilon},
             {"hidden_dims", t.hidden_dims},
             {"activation", t.activation == Activation::ReLU ? "relu" : "tanh"},
             {"seeds", t.seeds},
             {"decode", t.decode ? (*t.decode == DecodeRule::Count ? "count" : "argmax") : "default"},
             {"ties", t.ties == TieHandling::LowestClass ? "lowest" : "exclude"},
             {"train_fraction", t.train_fraction},
             {"ece_bins", t.ece_bins}};
  Json j{{"methods", e.methods},
         {"folds", e.folds},
         {"split_seed", e.split_seed},
         {"train", train}};
  if (e.synthetic) {
    const auto& s = *e.synthetic;
    j["synthetic"] = Json{{"n_examples", s.n_examples},     {"n_features", s.n_features},
                          {"num_classes", s.num_classes},   {"n_raters", s.n_raters},
                          {"thresholds", s.thresholds},     {"feature_noise_sd", s.feature_noise_sd},
                          {"rater_noise_sd", s.rater_noise_sd}, {"seed", s.seed}};
  } else {
    j["data"] = fs::path(e.data_path).filename().string();
  }
  return j;
}

int cmd_generate(const Options& opt, std::ostream& out) {
  if (opt.config.empty()) throw InputError("generate needs --config");
  if (opt.out.empty()) throw InputError("generate needs --out");
  SyntheticConfig config = parse_synthetic(load_json(opt.config), "");
  if (opt.seed) config.seed = *opt.seed;
  const Dataset data = generate_synthetic(config);
  write_file_atomic(opt.out, dataset_to_csv(data));
  out << "wrote " << data.size() << " examples to " << opt.out << " (mean pairwise rater QWK "
      << mean_pairwise_rater_qwk(data) << ")\n";
  return kExitOk;
}

int cmd_cv(const Options& opt, std::ostream& out) {
  const Experiment e = parse_experiment(opt);
  const Dataset data = load_dataset(e);
  std::vector<ExperimentResult> results;
  for (const auto& name : e.methods) {
    TrainConfig config = e.train;
    config.method = method_from_name(name);
    logger()->info("cross-validating {} ({} folds, {} seeds)", name, e.folds, config.seeds.size());
    results.push_back(run_cv(data, config, e.folds, e.split_seed, opt.jobs));
  }
  std::vector<ComparisonReport> comparisons;
  for (const auto& c : e.comparisons) {
    const auto find = [&](const std::string& m) -> const ExperimentResult& {
      for (const auto& r : results) {
        if (r.method == m) return r;
      }
      throw InputError("comparison names method '" + m + "' which is not in the method list");
    };
    comparisons.push_back(compare_methods(find(c.a), find(c.b), c.metric, c.direction));
  }
  write_experiment(e.out, results, experiment_json(e), e.train.ece_bins, comparisons);
  for (const auto& r : results) {
    const auto& mae = r.summary.at("mae_uw");
    const auto& ece = r.summary.at("ece");
    out << r.method << ": UW-MAE " << (mae ? mae->mean : std::nan("")) << ", ECE "
        << (ece ? ece->mean : std::nan("")) << (r.partial ? " (partial)" : "") << '\n';
  }
  for (const auto& c : comparisons) out << c.sentence() << '\n';
  const bool any_partial =
      std::any_of(results.begin(), results.end(), [](const auto& r) { return r.partial; });
  return any_partial ? kExitRuntimeError : kExitOk;
}

int cmd_train(const Options& opt, std::ostream& out) {
  Experiment e = parse_experiment(opt);
  if (e.methods.size() != 1) throw InputError("train takes exactly one method in --methods");
  const Dataset data = load_dataset(e);
  TrainConfig config = e.train;
  config.method = method_from_name(e.methods.front());
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto ties = resolve_ties(data, config.ties);
  auto [train, val] =
      train_val_split(data, all, config.train_fraction, derive_seed(e.split_seed, "train-command"));
  const fs::path base(e.out);
  std::vector<ModelParams> models;
  std::vector<TrainingHistory> histories;
  for (std::uint64_t seed : config.seeds) {
    auto trained = train_one(data, config, seed, train, val, ties);
    save_params(trained.params, (base / ("model_seed_" + std::to_string(seed) + ".json")).string());
    models.push_back(std::move(trained.params));
    histories.push_back(std::move(trained.history));
  }
  std::vector<std::string> ids;
  const auto records = evaluate_models(data, models, config, val, ties, &ids);
  write_file_atomic((base / "history.csv").string(), history_to_csv(histories));
  write_file_atomic((base / "val_records.csv").string(), records_to_csv(records, ids));
  write_file_atomic((base / "val_metrics.json").string(),
                    metrics_json(compute_report(records, config.ece_bins), records.size(),
                                 config.ece_bins));
  out << "trained " << config.method.name << " on " << train.size() << " examples; validation UW-MAE "
      << mae(records, true) << '\n';
  return kExitOk;
}

int cmd_evaluate(const Options& opt, std::ostream& out) {
  if (opt.data.empty()) throw InputError("evaluate needs --data <records.csv>");
  const int bins = opt.bins.value_or(10);
  if (bins < 1) throw InputError("--bins must be >= 1");
  const auto records = records_from_csv(read_file(opt.data));
  const std::string text = metrics_json(compute_report(records, bins), records.size(), bins);
  if (!opt.out.empty()) {
    write_file_atomic(opt.out, text);
  } else {
    out << text;
  }
  return kExitOk;
}

int cmd_curves(const Options& opt, std::ostream& out) {
  if (opt.data.empty()) throw InputError("curves needs --data <records.csv>");
  if (opt.out.empty()) throw InputError("curves needs --out <dir>");
  const int bins = opt.bins.value_or(10);
  if (bins < 1) throw InputError("--bins must be >= 1");
  const auto records = records_from_csv(read_file(opt.data));
  write_curves(opt.out, records, bins);
  out << "wrote calibration.csv, risk_coverage.csv, confusion.csv to " << opt.out << '\n';
  return kExitOk;
}

int cmd_compare(const Options& opt, std::ostream& out) {
  if (opt.metric.empty()) throw InputError("compare needs --metric");
  if (std::find(metric_names().begin(), metric_names().end(), opt.metric) == metric_names().end()) {
    throw InputError("unknown metric '" + opt.metric + "'");
  }
  const Direction direction = parse_direction(opt.direction);
  const auto values = [&](const std::string& dir) {
    std::vector<std::optional<double>> v;
    for (const auto& report : read_fold_reports(dir)) {
      const auto it = report.find(opt.metric);
      v.push_back(it == report.end() ? std::nullopt : it->second);
    }
    return v;
  };
  const auto name = [](const std::string& dir) {
    return fs::path(dir).lexically_normal().filename().string().empty()
               ? fs::path(dir).lexically_normal().parent_path().filename().string()
               : fs::path(dir).lexically_normal().filename().string();
  };
  const auto report = compare_fold_values(name(opt.dir_a), values(opt.dir_a), name(opt.dir_b),
                                          values(opt.dir_b), opt.metric, direction);
  const std::string text = comparison_json(report).dump(2) + "\n";
  if (!opt.out.empty()) write_file_atomic(opt.out, text);
  out << text;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Soft-label ordinal regression experiments", "ordreg"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opt.config, "JSON config file");
    cmd->add_option("--data", opt.data, "dataset CSV");
    cmd->add_option("--methods", opt.methods, "comma-separated methods: " + valid_method_names());
    cmd->add_option("--out", opt.out, "output directory");
    cmd->add_option("--seed", opt.seed, "override every seed in the config");
    cmd->add_option("--decode", opt.decode, "hard-prediction rule: count or argmax");
    cmd->add_option("--ties", opt.ties, "tie handling: exclude (skip ties in evaluation, resample them per epoch in training) or lowest");
    cmd->add_option("--classes", opt.classes, "number of classes when it cannot be inferred");
  };

  auto* generate = app.add_subcommand("generate", "write a synthetic multi-rater dataset as CSV");
  generate->add_option("--config", opt.config, "synthetic config JSON")->required();
  generate->add_option("--out", opt.out, "output CSV")->required();
  generate->add_option("--seed", opt.seed, "override the generator seed");

  auto* train = app.add_subcommand("train", "train one method on an 80/20 split");
  add_common(train);

  auto* cv = app.add_subcommand("cv", "cross-validated experiment over a method list");
  add_common(cv);
  cv->add_option("--jobs", opt.jobs, "parallel training jobs")->check(CLI::PositiveNumber);
  cv->add_option("--folds", opt.folds, "number of folds");

  auto* evaluate = app.add_subcommand("evaluate", "metrics over an exported records CSV");
  evaluate->add_option("--data", opt.data, "records CSV")->required();
  evaluate->add_option("--out", opt.out, "metrics JSON (default: stdout)");
  evaluate->add_option("--bins", opt.bins, "calibration bins (default 10)");

  auto* compare = app.add_subcommand("compare", "paired one-sided t-test across folds");
  compare->add_option("dir_a", opt.dir_a, "results/<method> directory")->required();
  compare->add_option("dir_b", opt.dir_b, "results/<method> directory")->required();
  compare->add_option("--metric", opt.metric, "metric name")->required();
  compare->add_option("--direction", opt.direction, "lower or greater (hypothesis on a vs b)");
  compare->add_option("--out", opt.out, "write the report JSON here too");

  auto* curves = app.add_subcommand("curves", "calibration, risk-coverage and confusion CSVs");
  curves->add_option("--data", opt.data, "records CSV")->required();
  curves->add_option("--out", opt.out, "output directory")->required();
  curves->add_option("--bins", opt.bins, "calibration bins (default 10)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }

  try {
    if (*generate) return cmd_generate(opt, out);
    if (*train) return cmd_train(opt, out);
    if (*cv) return cmd_cv(opt, out);
    if (*evaluate) return cmd_evaluate(opt, out);
    if (*compare) return cmd_compare(opt, out);
    if (*curves) return cmd_curves(opt, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "runtime failure: " << e.what() << '\n';
    return kExitRuntimeError;
  }
  return kExitInputError;
}

}  // namespace ordreg::cli

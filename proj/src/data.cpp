#include "ordreg/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "ordreg/error.hpp"
#include "ordreg/io.hpp"
#include "ordreg/log.hpp"
#include "ordreg/metrics.hpp"
#include "ordreg/random.hpp"

namespace ordreg {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

int threshold_class(double value, const std::vector<double>& thresholds) {
  int c = 1;
  for (double t : thresholds) {
    if (t < value) ++c;
  }
  return c;
}

bool starts_with(const std::string& s, std::string_view prefix) {
  return s.size() >= prefix.size() && s.compare(0, prefix.size(), prefix) == 0;
}

[[noreturn]] void fail_line(std::size_t line, const std::string& message) {
  throw InputError("line " + std::to_string(line) + ": " + message);
}

double parse_number(const std::string& field, std::size_t line, const std::string& column) {
  const std::string text = trim(field);
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    fail_line(line, "column '" + column + "': not a number: '" + field + "'");
  }
  return value;
}

long parse_integer(const std::string& field, std::size_t line, const std::string& column) {
  const std::string text = trim(field);
  long value = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    fail_line(line, "column '" + column + "': not an integer: '" + field + "'");
  }
  return value;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw InputError("CSV header has no column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

Dataset::Dataset(ProblemSpec spec, std::vector<Example> examples)
    : spec_(std::move(spec)), examples_(std::move(examples)) {
  spec_.validate();
  if (examples_.empty()) throw InputError("dataset has no examples");
  feature_dim_ = examples_.front().features.size();
  if (feature_dim_ == 0) throw InputError("dataset examples have no features");
  soft_.reserve(examples_.size());
  for (std::size_t i = 0; i < examples_.size(); ++i) {
    const Example& ex = examples_[i];
    if (ex.features.size() != feature_dim_) {
      throw InputError("example " + ex.id + " has " + std::to_string(ex.features.size()) +
                       " features, expected " + std::to_string(feature_dim_));
    }
    if (ex.votes.empty()) throw InputError("example " + ex.id + " has no votes");
    soft_.push_back(soft_label_from_votes(ex.votes, spec_));
    exceedance_.push_back(exceedance_from_soft(soft_.back()));
    mode_.push_back(hard_label_from_soft(soft_.back(), TiePolicy::ReportTie));
  }
}

void SyntheticConfig::validate() {
  if (n_examples < 1 || n_features < 1 || n_raters < 1) {
    throw InputError("synthetic config: n_examples, n_features and n_raters must be >= 1");
  }
  ProblemSpec{num_classes, {}}.validate();
  if (thresholds.empty()) thresholds = default_thresholds(num_classes);
  if (thresholds.size() != static_cast<std::size_t>(num_classes - 1)) {
    throw InputError("synthetic config: thresholds must have num_classes - 1 entries");
  }
  for (std::size_t k = 1; k < thresholds.size(); ++k) {
    if (!(thresholds[k] > thresholds[k - 1])) {
      throw InputError("synthetic config: thresholds must be strictly increasing");
    }
  }
  if (!(feature_noise_sd >= 0.0) || !(rater_noise_sd >= 0.0)) {
    throw InputError("synthetic config: noise standard deviations must be >= 0");
  }
}

std::vector<double> default_thresholds(int num_classes) {
  std::vector<double> t;
  for (int k = 1; k < num_classes; ++k) {
    t.push_back(normal_quantile(static_cast<double>(k) / num_classes));
  }
  return t;
}

std::vector<double> synthetic_projection(const SyntheticConfig& config) {
  Rng rng(derive_seed(config.seed, "synthetic-projection"));
  std::vector<double> w(static_cast<std::size_t>(config.n_features));
  double norm = 0.0;
  for (double& v : w) {
    v = rng.normal();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (double& v : w) v /= norm;
  return w;
}

Dataset generate_synthetic(SyntheticConfig config) {
  config.validate();
  const auto w = synthetic_projection(config);
  Rng latent_rng(derive_seed(config.seed, "synthetic-latent"));
  Rng feature_rng(derive_seed(config.seed, "synthetic-features"));
  Rng rater_rng(derive_seed(config.seed, "synthetic-raters"));
  std::vector<Example> examples;
  examples.reserve(static_cast<std::size_t>(config.n_examples));
  for (int i = 0; i < config.n_examples; ++i) {
    Example ex;
    ex.id = "s" + std::to_string(i);
    const double z = latent_rng.normal();
    ex.features.resize(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) {
      ex.features[j] = w[j] * z + config.feature_noise_sd * feature_rng.normal();
    }
    for (int r = 0; r < config.n_raters; ++r) {
      const double seen = z + config.rater_noise_sd * rater_rng.normal();
      ex.votes.push_back(HardLabel{threshold_class(seen, config.thresholds)});
    }
    examples.push_back(std::move(ex));
  }
  return Dataset(ProblemSpec{config.num_classes, {}}, std::move(examples));
}

double mean_pairwise_rater_qwk(const Dataset& dataset) {
  std::size_t slots = 0;
  for (const auto& ex : dataset.examples()) slots = std::max(slots, ex.votes.size());
  double total = 0.0;
  int pairs = 0;
  for (std::size_t a = 0; a < slots; ++a) {
    for (std::size_t b = a + 1; b < slots; ++b) {
      std::vector<int> va, vb;
      for (const auto& ex : dataset.examples()) {
        if (ex.votes.size() > b) {
          va.push_back(ex.votes[a].value);
          vb.push_back(ex.votes[b].value);
        }
      }
      if (va.empty()) continue;
      const std::vector<double> ones(va.size(), 1.0);
      const auto kappa = quadratic_weighted_kappa(va, vb, ones, dataset.num_classes());
      if (!kappa) continue;
      total += *kappa;
      ++pairs;
    }
  }
  return pairs == 0 ? std::numeric_limits<double>::quiet_NaN() : total / pairs;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  try {
    return parse_csv(in, schema);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

Dataset parse_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("CSV is empty");
  if (starts_with(line, "\xEF\xBB\xBF")) line.erase(0, 3);
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);

  std::vector<std::size_t> feature_idx, vote_idx, count_idx;
  if (schema.feature_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (starts_with(header[c], "f_")) feature_idx.push_back(c);
    }
  } else {
    for (const auto& name : schema.feature_columns) feature_idx.push_back(column_index(header, name));
  }
  if (schema.vote_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (starts_with(header[c], "r_")) vote_idx.push_back(c);
      if (starts_with(header[c], "c_")) count_idx.push_back(c);
    }
  } else {
    for (const auto& name : schema.vote_columns) vote_idx.push_back(column_index(header, name));
  }
  if (feature_idx.empty()) throw InputError("CSV header has no feature columns (f_*)");
  if (vote_idx.empty() && count_idx.empty()) {
    throw InputError("CSV header has no vote (r_*) or count (c_*) columns");
  }
  if (!vote_idx.empty() && !count_idx.empty()) {
    throw InputError("CSV mixes vote (r_*) and count (c_*) columns");
  }
  // Count columns must be c_1..c_K in order.
  for (std::size_t j = 0; j < count_idx.size(); ++j) {
    if (header[count_idx[j]] != "c_" + std::to_string(j + 1)) {
      throw InputError("count columns must be c_1..c_K in increasing order; found '" +
                       header[count_idx[j]] + "' at position " + std::to_string(j + 1));
    }
  }
  const auto id_it = std::find(header.begin(), header.end(), schema.id_column);
  const bool has_id = id_it != header.end();
  const auto id_col = static_cast<std::size_t>(id_it - header.begin());

  int num_classes = schema.num_classes;
  if (!count_idx.empty()) {
    if (num_classes != 0 && num_classes != static_cast<int>(count_idx.size())) {
      throw InputError("schema num_classes disagrees with the number of count columns");
    }
    num_classes = static_cast<int>(count_idx.size());
  }

  std::vector<Example> examples;
  int max_vote = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      fail_line(line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                             std::to_string(fields.size()));
    }
    Example ex;
    ex.id = has_id ? trim(fields[id_col]) : std::to_string(examples.size());
    for (std::size_t c : feature_idx) ex.features.push_back(parse_number(fields[c], line_no, header[c]));
    for (std::size_t c : vote_idx) {
      if (trim(fields[c]).empty()) continue;
      const long v = parse_integer(fields[c], line_no, header[c]);
      if (v < 1 || (num_classes != 0 && v > num_classes)) {
        fail_line(line_no, "vote " + std::to_string(v) + " in column '" + header[c] +
                               "' outside 1.." +
                               (num_classes != 0 ? std::to_string(num_classes) : std::string("K")));
      }
      ex.votes.push_back(HardLabel{static_cast<int>(v)});
      max_vote = std::max(max_vote, static_cast<int>(v));
    }
    for (std::size_t j = 0; j < count_idx.size(); ++j) {
      const std::size_t c = count_idx[j];
      if (trim(fields[c]).empty()) continue;
      const long n = parse_integer(fields[c], line_no, header[c]);
      if (n < 0) fail_line(line_no, "negative count in column '" + header[c] + "'");
      for (long r = 0; r < n; ++r) ex.votes.push_back(HardLabel{static_cast<int>(j) + 1});
    }
    if (ex.votes.empty()) fail_line(line_no, "example '" + ex.id + "' has no votes");
    for (double f : ex.features) {
      if (!std::isfinite(f)) fail_line(line_no, "non-finite feature value");
    }
    examples.push_back(std::move(ex));
  }
  if (examples.empty()) throw InputError("CSV has no data rows");
  if (num_classes == 0) num_classes = std::max(2, max_vote);
  return Dataset(ProblemSpec{num_classes, {}}, std::move(examples));
}

std::string dataset_to_csv(const Dataset& dataset) {
  std::size_t slots = 0;
  for (const auto& ex : dataset.examples()) slots = std::max(slots, ex.votes.size());
  std::ostringstream out;
  out << "id";
  for (std::size_t j = 0; j < dataset.feature_dim(); ++j) out << ",f_" << j + 1;
  for (std::size_t r = 0; r < slots; ++r) out << ",r_" << r + 1;
  out << '\n';
  for (const auto& ex : dataset.examples()) {
    out << ex.id;
    for (double f : ex.features) out << ',' << format_double(f);
    for (std::size_t r = 0; r < slots; ++r) {
      out << ',';
      if (r < ex.votes.size()) out << ex.votes[r].value;
    }
    out << '\n';
  }
  return out.str();
}

std::vector<HardLabel> combine_rater_sets(const std::vector<HardLabel>& base,
                                          const std::vector<HardLabel>& extra,
                                          int replication_factor) {
  if (replication_factor < 1) throw InputError("replication_factor must be >= 1");
  std::vector<HardLabel> out;
  if (base.size() == 1) {
    out.assign(static_cast<std::size_t>(replication_factor), base.front());
  } else {
    out = base;
  }
  out.insert(out.end(), extra.begin(), extra.end());
  return out;
}

std::vector<TieAnnotation> resolve_ties(const Dataset& dataset, TieHandling handling) {
  std::vector<TieAnnotation> out(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (const auto* tie = std::get_if<Tie>(&dataset.mode(i))) {
      out[i].tied = true;
      out[i].classes = tie->classes;
    }
  }
  if (handling == TieHandling::LowestClass) {
    const auto n = std::count_if(out.begin(), out.end(), [](const auto& t) { return t.tied; });
    if (n > 0) logger()->debug("{} tied examples resolved to their lowest class", n);
  }
  return out;
}

HardLabel training_label(const Dataset& dataset, const std::vector<TieAnnotation>& ties,
                         TieHandling handling, std::size_t example, std::uint64_t seed,
                         int epoch) {
  const TieAnnotation& tie = ties[example];
  if (!tie.tied || handling == TieHandling::LowestClass) return dataset.hard(example);
  Rng rng(derive_seed(seed, "tie-resample", static_cast<std::uint64_t>(epoch), example));
  return HardLabel{tie.classes[static_cast<std::size_t>(rng.below(tie.classes.size()))]};
}

bool include_in_evaluation(const std::vector<TieAnnotation>& ties, TieHandling handling,
                           std::size_t example) {
  return handling == TieHandling::LowestClass || !ties[example].tied;
}

std::vector<std::size_t> FoldSplit::train_indices(std::size_t fold,
                                                  std::size_t dataset_size) const {
  std::vector<bool> in_test(dataset_size, false);
  for (std::size_t i : test_folds.at(fold)) in_test[i] = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dataset_size; ++i) {
    if (!in_test[i]) out.push_back(i);
  }
  return out;
}

FoldSplit stratified_k_fold(const Dataset& dataset, int k, std::uint64_t seed) {
  if (k < 2) throw InputError("k-fold split needs k >= 2, got " + std::to_string(k));
  if (static_cast<std::size_t>(k) > dataset.size()) {
    throw InputError("k-fold split: k = " + std::to_string(k) + " exceeds the dataset size");
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < dataset.size(); ++i) by_class[dataset.hard(i).value].push_back(i);

  FoldSplit split;
  split.test_folds.resize(static_cast<std::size_t>(k));
  std::size_t deal = 0;
  std::size_t smallest = dataset.size();
  for (auto& [label, members] : by_class) {
    smallest = std::min(smallest, members.size());
    Rng rng(derive_seed(seed, "stratified-k-fold", static_cast<std::uint64_t>(label)));
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t i : members) {
      split.test_folds[deal % static_cast<std::size_t>(k)].push_back(i);
      ++deal;
    }
  }
  if (smallest < static_cast<std::size_t>(k)) {
    logger()->warn("k = {} exceeds the smallest class count ({}); some folds miss a class", k,
                   smallest);
  }
  for (auto& fold : split.test_folds) std::sort(fold.begin(), fold.end());
  return split;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> train_val_split(
    const Dataset& dataset, const std::vector<std::size_t>& indices, double fraction,
    std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw InputError("train fraction must lie strictly between 0 and 1");
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i : indices) by_class[dataset.hard(i).value].push_back(i);
  std::vector<std::size_t> train, val;
  for (auto& [label, members] : by_class) {
    Rng rng(derive_seed(seed, "train-val-split", static_cast<std::uint64_t>(label)));
    rng.shuffle(std::span<std::size_t>(members));
    const auto n_train = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(members.size())));
    train.insert(train.end(), members.begin(), members.begin() + static_cast<long>(n_train));
    val.insert(val.end(), members.begin() + static_cast<long>(n_train), members.end());
  }
  if (train.empty() || val.empty()) {
    throw InputError("train/validation split leaves an empty side (" + std::to_string(train.size()) +
                     "/" + std::to_string(val.size()) + ")");
  }
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {std::move(train), std::move(val)};
}

}  // namespace ordreg

#include "ordreg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numeric>
#include <thread>

#include "ordreg/error.hpp"
#include "ordreg/log.hpp"
#include "ordreg/random.hpp"

namespace ordreg {

namespace {

Target training_target(const Dataset& dataset, const TrainConfig& config,
                       const std::vector<TieAnnotation>& ties, std::size_t i, std::uint64_t seed,
                       int epoch) {
  switch (config.method.loss) {
    case LossKind::OrSoft: return dataset.exceedance(i);
    case LossKind::CESoft: return dataset.soft(i);
    default: return training_label(dataset, ties, config.ties, i, seed, epoch);
  }
}

std::vector<std::size_t> evaluable(std::span<const std::size_t> indices,
                                   const std::vector<TieAnnotation>& ties, TieHandling handling) {
  std::vector<std::size_t> out;
  for (std::size_t i : indices) {
    if (include_in_evaluation(ties, handling, i)) out.push_back(i);
  }
  return out;
}

// Runs fn(job) for job in [0, count) on up to `jobs` threads.
template <class Fn>
void parallel_for(std::size_t count, int jobs, Fn fn) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t j = 0; j < count; ++j) fn(j);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t j = next++; j < count; j = next++) fn(j);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = {
      {"ce", LossKind::CE, HeadKind::Softmax},
      {"ce_soft", LossKind::CESoft, HeadKind::Softmax},
      {"or_cnn", LossKind::OrCnn, HeadKind::Independent},
      {"or_soft", LossKind::OrSoft, HeadKind::Independent},
      {"coral", LossKind::OrCnn, HeadKind::SharedSlopeBias},
      {"coral_soft", LossKind::OrSoft, HeadKind::SharedSlopeBias},
      {"corn", LossKind::Corn, HeadKind::Independent},
      {"sord_ae", LossKind::SordAE, HeadKind::Softmax},
      {"sord_se", LossKind::SordSE, HeadKind::Softmax},
  };
  return methods;
}

std::string valid_method_names() {
  std::string out;
  for (const auto& m : all_methods()) {
    if (!out.empty()) out += ", ";
    out += m.name;
  }
  return out;
}

Method method_from_name(std::string_view name) {
  for (const auto& m : all_methods()) {
    if (m.name == name) return m;
  }
  throw InputError("unknown method '" + std::string(name) + "'; valid methods: " +
                   valid_method_names());
}

DecodeRule TrainConfig::decode_rule() const {
  if (decode) return *decode;
  return method.head == HeadKind::Softmax ? DecodeRule::Argmax : DecodeRule::Count;
}

void TrainConfig::validate() const {
  check_head_for_loss(method.head, method.loss);
  if (epochs < 1) throw InputError("epochs must be >= 1");
  if (batch_size < 1) throw InputError("batch_size must be >= 1");
  if (!(lr > 0.0)) throw InputError("lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw InputError("adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw InputError("adam epsilon must be positive");
  if (seeds.empty()) throw InputError("seeds must list at least one seed");
  if (ece_bins < 1) throw InputError("ece_bins must be >= 1");
  for (int h : hidden_dims) {
    if (h < 1) throw InputError("hidden_dims entries must be >= 1");
  }
}

TrainedModel train_one(const Dataset& dataset, const TrainConfig& config, std::uint64_t seed,
                       std::span<const std::size_t> train, std::span<const std::size_t> val,
                       const std::vector<TieAnnotation>& ties) {
  config.validate();
  if (train.empty() || val.empty()) throw InputError("train_one needs non-empty train and val sets");
  const auto val_eval = evaluable(val, ties, config.ties);
  if (val_eval.empty()) throw InputError("validation set has no evaluable (untied) examples");

  EncoderConfig encoder{static_cast<int>(dataset.feature_dim()), config.hidden_dims,
                        config.activation};
  ModelParams params = init_params(encoder, config.method.head, dataset.spec(), seed);
  AdamState adam =
      AdamState::for_params(params, config.lr, config.beta1, config.beta2, config.epsilon);
  Rng order_rng(derive_seed(seed, "batch-order"));

  TrainedModel best{params, {}};
  best.history.seed = seed;
  std::vector<std::size_t> order(train.begin(), train.end());
  std::vector<BatchItem> batch;
  const auto batch_size = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    order_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t stop = std::min(order.size(), start + batch_size);
      batch.clear();
      for (std::size_t j = start; j < stop; ++j) {
        const std::size_t i = order[j];
        batch.push_back(BatchItem{dataset.example(i).features,
                                  training_target(dataset, config, ties, i, seed, epoch)});
      }
      auto step = loss_and_gradient(params, batch, config.method.loss);
      if (!std::isfinite(step.loss)) {
        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) + " (seed " +
                               std::to_string(seed) + ")");
      }
      adam_step(params, step.gradient, adam);
      loss_sum += step.loss * static_cast<double>(stop - start);
    }
    const ModelParams single[] = {params};
    const auto records = evaluate_models(dataset, single, config, val_eval, ties);
    const double val_mae = mae(records, true);
    best.history.epochs.push_back({epoch, loss_sum / static_cast<double>(order.size()), val_mae});
    if (epoch == 1 || val_mae < best.history.best_val_mae_uw) {
      best.params = params;
      best.history.best_epoch = epoch;
      best.history.best_val_mae_uw = val_mae;
    }
  }
  logger()->debug("{} seed {}: best epoch {} (val UW-MAE {:.4f})", config.method.name, seed,
                  best.history.best_epoch, best.history.best_val_mae_uw);
  return best;
}

std::vector<EvalRecord> evaluate_models(const Dataset& dataset,
                                        std::span<const ModelParams> models,
                                        const TrainConfig& config,
                                        std::span<const std::size_t> indices,
                                        const std::vector<TieAnnotation>& ties,
                                        std::vector<std::string>* ids) {
  if (models.empty()) throw InputError("evaluate_models needs at least one model");
  const DecodeRule rule = config.decode_rule();
  const std::size_t tasks = static_cast<std::size_t>(dataset.num_classes() - 1);
  std::vector<EvalRecord> records;
  std::vector<ClassDistribution> dists;
  if (ids != nullptr) ids->clear();
  for (std::size_t i : indices) {
    if (!include_in_evaluation(ties, config.ties, i)) continue;
    dists.clear();
    std::vector<double> task_mean(tasks, 0.0);
    bool have_tasks = true;
    for (const ModelParams& m : models) {
      auto pred = predict(m, config.method.loss, dataset.example(i).features);
      if (pred.tasks) {
        for (std::size_t k = 0; k < tasks; ++k) task_mean[k] += (*pred.tasks)[k];
      } else {
        have_tasks = false;
      }
      dists.push_back(std::move(pred.dist));
    }
    ClassDistribution dist = ensemble_average(dists);
    HardLabel predicted;
    if (rule == DecodeRule::Count) {
      if (have_tasks) {
        for (double& v : task_mean) v /= static_cast<double>(models.size());
        predicted = decode_count(TaskProbabilities(std::move(task_mean)));
      } else {
        predicted = decode_count(tasks_from_class_distribution(dist));
      }
    } else {
      predicted = decode_argmax(dist);
    }
    records.push_back(EvalRecord::make(dataset.soft(i), std::move(dist), predicted));
    if (ids != nullptr) ids->push_back(dataset.example(i).id);
  }
  return records;
}

std::vector<std::optional<double>> ExperimentResult::fold_values(const std::string& metric) const {
  std::vector<std::optional<double>> out;
  for (const auto& f : folds) {
    if (f.failed) {
      out.push_back(std::nullopt);
      continue;
    }
    const auto it = f.report.find(metric);
    out.push_back(it == f.report.end() ? std::nullopt : it->second);
  }
  return out;
}

std::map<std::string, std::optional<MetricSummary>> summarize(const std::vector<FoldResult>& folds) {
  std::map<std::string, std::optional<MetricSummary>> out;
  for (const auto& name : metric_names()) {
    std::vector<double> values;
    for (const auto& f : folds) {
      if (f.failed) continue;
      const auto it = f.report.find(name);
      if (it != f.report.end() && it->second) values.push_back(*it->second);
    }
    if (values.empty()) {
      out[name] = std::nullopt;
      continue;
    }
    MetricSummary s;
    s.n = static_cast<int>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / s.n;
    if (s.n >= 2) {
      double ss = 0.0;
      for (double v : values) ss += (v - s.mean) * (v - s.mean);
      s.std = std::sqrt(ss / (s.n - 1));
    }
    out[name] = s;
  }
  return out;
}

ExperimentResult run_cv(const Dataset& dataset, const TrainConfig& config, int k,
                        std::uint64_t split_seed, int jobs) {
  config.validate();
  const FoldSplit split = stratified_k_fold(dataset, k, split_seed);
  const auto ties = resolve_ties(dataset, config.ties);
  const std::size_t folds = split.num_folds();
  const std::size_t n_seeds = config.seeds.size();

  struct FoldPlan {
    std::vector<std::size_t> train, val;
    std::string error;
  };
  std::vector<FoldPlan> plans(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    try {
      auto [train, val] = train_val_split(dataset, split.train_indices(f, dataset.size()),
                                          config.train_fraction,
                                          derive_seed(split_seed, "fold-train-val", f));
      plans[f].train = std::move(train);
      plans[f].val = std::move(val);
    } catch (const InputError& e) {
      plans[f].error = e.what();
    }
  }

  struct JobResult {
    std::optional<TrainedModel> model;
    std::string error;
  };
  std::vector<JobResult> job_results(folds * n_seeds);
  parallel_for(job_results.size(), jobs, [&](std::size_t job) {
    const std::size_t f = job / n_seeds;
    const std::uint64_t seed = config.seeds[job % n_seeds];
    if (!plans[f].error.empty()) {
      job_results[job].error = plans[f].error;
      return;
    }
    try {
      job_results[job].model = train_one(dataset, config, seed, plans[f].train, plans[f].val, ties);
    } catch (const std::exception& e) {
      job_results[job].error = e.what();
    }
  });

  ExperimentResult result;
  result.method = config.method.name;
  for (std::size_t f = 0; f < folds; ++f) {
    FoldResult fold;
    fold.fold = static_cast<int>(f);
    std::vector<ModelParams> models;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      auto& job = job_results[f * n_seeds + s];
      if (!job.model) {
        fold.failed = true;
        if (fold.error.empty()) fold.error = job.error;
        continue;
      }
      models.push_back(job.model->params);
      fold.histories.push_back(job.model->history);
    }
    if (!fold.failed) {
      fold.records = evaluate_models(dataset, models, config, split.test_folds[f], ties,
                                     &fold.record_ids);
      if (fold.records.empty()) {
        fold.failed = true;
        fold.error = "test fold has no evaluable examples";
      } else {
        fold.report = compute_report(fold.records, config.ece_bins);
      }
    }
    if (fold.failed) {
      result.partial = true;
      logger()->warn("{} fold {} failed: {}", config.method.name, f, fold.error);
    }
    result.folds.push_back(std::move(fold));
  }
  result.summary = summarize(result.folds);
  return result;
}

std::string ComparisonReport::sentence() const {
  char p[32];
  std::snprintf(p, sizeof(p), "%.3g", p_value);
  const char* dir = direction == Direction::Lower ? "lower" : "higher";
  return method_a + (significant ? " achieves significantly " : " does not achieve significantly ") +
         dir + " " + metric + " than " + method_b + " (p = " + p + ")";
}

ComparisonReport compare_fold_values(const std::string& method_a,
                                     const std::vector<std::optional<double>>& a,
                                     const std::string& method_b,
                                     const std::vector<std::optional<double>>& b,
                                     const std::string& metric, Direction direction) {
  if (a.size() != b.size()) {
    throw InputError("cannot compare " + method_a + " and " + method_b + ": fold counts differ (" +
                     std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  std::vector<double> va, vb;
  for (std::size_t f = 0; f < a.size(); ++f) {
    if (!a[f] || !b[f]) {
      throw InputError("cannot compare " + metric + " at fold " + std::to_string(f) +
                       ": value missing or undefined");
    }
    va.push_back(*a[f]);
    vb.push_back(*b[f]);
  }
  ComparisonReport r;
  r.method_a = method_a;
  r.method_b = method_b;
  r.metric = metric;
  r.direction = direction;
  r.p_value = paired_t_test_one_sided(va, vb, direction);
  r.significant = r.p_value < kSignificanceLevel;
  r.folds = static_cast<int>(va.size());
  r.mean_a = std::accumulate(va.begin(), va.end(), 0.0) / static_cast<double>(va.size());
  r.mean_b = std::accumulate(vb.begin(), vb.end(), 0.0) / static_cast<double>(vb.size());
  return r;
}

ComparisonReport compare_methods(const ExperimentResult& a, const ExperimentResult& b,
                                 const std::string& metric, Direction direction) {
  return compare_fold_values(a.method, a.fold_values(metric), b.method, b.fold_values(metric),
                             metric, direction);
}

}  // namespace ordreg

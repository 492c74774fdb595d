#include "ordreg/losses.hpp"

#include <algorithm>
#include <cmath>

#include "ordreg/error.hpp"

namespace ordreg {

namespace {

double clamped_log(double p) {
  return std::log(std::clamp(p, kLogEpsilon, 1.0 - kLogEpsilon));
}

void check_tasks(std::size_t tasks, std::size_t expected) {
  if (tasks != expected) {
    throw InputError("expected " + std::to_string(expected) + " task probabilities, got " +
                     std::to_string(tasks));
  }
}

}  // namespace

std::string_view loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::CE: return "ce";
    case LossKind::CESoft: return "ce_soft";
    case LossKind::OrCnn: return "or_cnn";
    case LossKind::OrSoft: return "or_soft";
    case LossKind::Corn: return "corn";
    case LossKind::SordAE: return "sord_ae";
    case LossKind::SordSE: return "sord_se";
  }
  return "unknown";
}

double binary_cross_entropy(double prob, double target) {
  return -(target * clamped_log(prob) + (1.0 - target) * clamped_log(1.0 - prob));
}

double or_cnn_loss(const TaskProbabilities& tasks, HardLabel y) {
  check_label(y, static_cast<int>(tasks.size()) + 1);
  double loss = 0.0;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const double target = y.value > static_cast<int>(k) + 1 ? 1.0 : 0.0;
    loss += binary_cross_entropy(tasks[k], target);
  }
  return loss;
}

double or_soft_loss(const TaskProbabilities& tasks, const ExceedanceLabel& target) {
  check_tasks(tasks.size(), target.size());
  double loss = 0.0;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    loss += binary_cross_entropy(tasks[k], target[k]);
  }
  return loss;
}

double ce_loss(const ClassDistribution& dist, HardLabel y) {
  check_label(y, dist.num_classes());
  return -clamped_log(dist.prob(y));
}

double ce_soft_loss(const ClassDistribution& dist, const RatingDistribution& target) {
  if (dist.size() != target.size()) throw InputError("ce_soft_loss: class count mismatch");
  double loss = 0.0;
  for (std::size_t k = 0; k < dist.size(); ++k) {
    if (target[k] != 0.0) loss -= target[k] * clamped_log(dist[k]);
  }
  return loss;
}

double corn_loss(std::span<const TaskProbabilities> conditional, std::span<const HardLabel> labels,
                 Reduction reduction) {
  if (conditional.size() != labels.size()) {
    throw InputError("corn_loss: batch size mismatch");
  }
  if (conditional.empty()) return 0.0;
  const std::size_t tasks = conditional.front().size();
  std::vector<double> task_sum(tasks, 0.0);
  std::vector<std::size_t> task_count(tasks, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    check_tasks(conditional[i].size(), tasks);
    check_label(labels[i], static_cast<int>(tasks) + 1);
    // Task k (1-based) uses examples with y >= k.
    for (std::size_t k = 0; k < tasks && labels[i].value >= static_cast<int>(k) + 1; ++k) {
      const double target = labels[i].value > static_cast<int>(k) + 1 ? 1.0 : 0.0;
      task_sum[k] += binary_cross_entropy(conditional[i][k], target);
      ++task_count[k];
    }
  }
  double loss = 0.0;
  for (std::size_t k = 0; k < tasks; ++k) {
    if (task_count[k] == 0) continue;
    loss += reduction == Reduction::Mean ? task_sum[k] / static_cast<double>(task_count[k])
                                         : task_sum[k];
  }
  return loss;
}

TaskProbabilities corn_unconditional(const TaskProbabilities& conditional) {
  std::vector<double> out(conditional.size());
  double running = 1.0;
  for (std::size_t k = 0; k < conditional.size(); ++k) {
    running *= conditional[k];
    out[k] = running;
  }
  return TaskProbabilities(std::move(out));
}

double sord_loss(const ClassDistribution& dist, HardLabel y, const ProblemSpec& spec,
                 SordDistance distance) {
  return ce_soft_loss(dist, sord_soft_label(y, spec, distance));
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p != 0.0) h -= p * clamped_log(p);
  }
  return h;
}

}  // namespace ordreg

#include "ordreg/core.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <string>

#include "ordreg/error.hpp"

namespace ordreg {

namespace {

constexpr double kSumTolerance = 1e-9;

void check_distribution(const std::vector<double>& p, const char* what) {
  if (p.size() < 2) {
    throw InputError(std::string(what) + ": need at least 2 classes");
  }
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw InputError(std::string(what) + ": entry " + std::to_string(v) + " outside [0,1]");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > kSumTolerance) {
    throw InputError(std::string(what) + ": entries sum to " + std::to_string(total));
  }
}

void check_unit_entries(const std::vector<double>& p, const char* what) {
  if (p.empty()) throw InputError(std::string(what) + ": need at least one task");
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw InputError(std::string(what) + ": entry " + std::to_string(v) + " outside [0,1]");
    }
  }
}

template <class Dist>
ModeResult mode_of(const Dist& dist, TiePolicy policy) {
  const auto& p = dist.values();
  const double best = *std::max_element(p.begin(), p.end());
  Tie tie;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] == best) tie.classes.push_back(static_cast<int>(k) + 1);
  }
  if (tie.classes.size() == 1 || policy == TiePolicy::LowestClass) {
    return HardLabel{tie.classes.front()};
  }
  return tie;
}

}  // namespace

void ProblemSpec::validate() const {
  if (num_classes < 2) {
    throw InputError("num_classes must be >= 2, got " + std::to_string(num_classes));
  }
  if (!class_names.empty() && class_names.size() != static_cast<std::size_t>(num_classes)) {
    throw InputError("class_names must list exactly num_classes names");
  }
}

void check_label(HardLabel y, int num_classes) {
  if (y.value < 1 || y.value > num_classes) {
    throw InputError("class " + std::to_string(y.value) + " outside 1.." +
                     std::to_string(num_classes));
  }
}

RatingDistribution::RatingDistribution(std::vector<double> probs)
    : ProbabilityVector(std::move(probs)) {
  check_distribution(values_, "rating distribution");
}

ClassDistribution::ClassDistribution(std::vector<double> probs)
    : ProbabilityVector(std::move(probs)) {
  check_distribution(values_, "class distribution");
}

ExceedanceLabel::ExceedanceLabel(std::vector<double> exceed)
    : ProbabilityVector(std::move(exceed)) {
  check_unit_entries(values_, "exceedance label");
  for (std::size_t k = 1; k < values_.size(); ++k) {
    if (values_[k] > values_[k - 1] + kSumTolerance) {
      throw InputError("exceedance label must be non-increasing");
    }
  }
}

TaskProbabilities::TaskProbabilities(std::vector<double> probs)
    : ProbabilityVector(std::move(probs)) {
  check_unit_entries(values_, "task probabilities");
}

bool TaskProbabilities::is_rank_consistent() const {
  return std::is_sorted(values_.rbegin(), values_.rend());
}

RatingDistribution soft_label_from_votes(std::span<const HardLabel> votes, const ProblemSpec& spec) {
  spec.validate();
  if (votes.empty()) throw InputError("soft label needs at least one vote");
  std::vector<std::size_t> counts(static_cast<std::size_t>(spec.num_classes), 0);
  for (HardLabel v : votes) {
    check_label(v, spec.num_classes);
    ++counts[static_cast<std::size_t>(v.value - 1)];
  }
  std::vector<double> probs(counts.size());
  const auto n = static_cast<double>(votes.size());
  for (std::size_t k = 0; k < counts.size(); ++k) probs[k] = static_cast<double>(counts[k]) / n;
  return RatingDistribution(std::move(probs));
}

ModeResult hard_label_from_soft(const RatingDistribution& dist, TiePolicy policy) {
  return mode_of(dist, policy);
}

HardLabel mode_lowest(const RatingDistribution& dist) {
  return std::get<HardLabel>(mode_of(dist, TiePolicy::LowestClass));
}

ExceedanceLabel exceedance_from_soft(const RatingDistribution& dist) {
  const auto& p = dist.values();
  const std::size_t tasks = p.size() - 1;
  std::vector<double> exceed(tasks);
  // Accumulate from the top class down so each entry is an exact tail sum.
  double tail = 0.0;
  for (std::size_t k = tasks; k-- > 0;) {
    tail += p[k + 1];
    exceed[k] = std::min(tail, 1.0);
  }
  return ExceedanceLabel(std::move(exceed));
}

ExceedanceLabel exceedance_from_hard(HardLabel y, const ProblemSpec& spec) {
  check_label(y, spec.num_classes);
  std::vector<double> exceed(static_cast<std::size_t>(spec.num_tasks()));
  for (std::size_t k = 0; k < exceed.size(); ++k) {
    exceed[k] = y.value > static_cast<int>(k) + 1 ? 1.0 : 0.0;
  }
  return ExceedanceLabel(std::move(exceed));
}

ClassDistribution class_distribution_from_tasks(const TaskProbabilities& tasks, bool* clamped) {
  const auto& t = tasks.values();
  const std::size_t k_classes = t.size() + 1;
  std::vector<double> raw(k_classes);
  raw[0] = 1.0 - t[0];
  for (std::size_t k = 1; k + 1 < k_classes; ++k) raw[k] = t[k - 1] - t[k];
  raw[k_classes - 1] = t.back();

  bool any_clamped = false;
  for (double& v : raw) {
    if (v < 0.0) {
      v = 0.0;
      any_clamped = true;
    }
  }
  if (clamped != nullptr) *clamped = any_clamped;
  const double total = std::accumulate(raw.begin(), raw.end(), 0.0);
  assert(total > 0.0);
  if (any_clamped || std::abs(total - 1.0) > 0.0) {
    for (double& v : raw) v /= total;
  }
  return ClassDistribution(std::move(raw));
}

TaskProbabilities tasks_from_class_distribution(const ClassDistribution& dist) {
  const auto& p = dist.values();
  std::vector<double> tasks(p.size() - 1);
  double tail = 0.0;
  for (std::size_t k = tasks.size(); k-- > 0;) {
    tail += p[k + 1];
    tasks[k] = std::min(tail, 1.0);
  }
  return TaskProbabilities(std::move(tasks));
}

HardLabel decode_count(const TaskProbabilities& tasks) {
  int above = 0;
  for (double v : tasks) {
    if (v > 0.5) ++above;
  }
  return HardLabel{1 + above};
}

ModeResult decode_argmax(const ClassDistribution& dist, TiePolicy policy) {
  return mode_of(dist, policy);
}

HardLabel decode_argmax(const ClassDistribution& dist) {
  return std::get<HardLabel>(mode_of(dist, TiePolicy::LowestClass));
}

RatingDistribution sord_soft_label(HardLabel true_class, const ProblemSpec& spec,
                                   SordDistance distance) {
  spec.validate();
  check_label(true_class, spec.num_classes);
  std::vector<double> probs(static_cast<std::size_t>(spec.num_classes));
  double total = 0.0;
  for (int k = 1; k <= spec.num_classes; ++k) {
    const double d = std::abs(k - true_class.value);
    const double phi = distance == SordDistance::Absolute ? d : d * d;
    probs[static_cast<std::size_t>(k - 1)] = std::exp(-phi);
    total += probs[static_cast<std::size_t>(k - 1)];
  }
  for (double& v : probs) v /= total;
  return RatingDistribution(std::move(probs));
}

}  // namespace ordreg

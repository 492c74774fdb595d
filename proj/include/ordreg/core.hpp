#pragma once

// Label representations for ordinal problems with K ordered classes
// 1 < 2 < ... < K, and the transforms between them.
//
// Class labels are 1-based everywhere in the public API (HardLabel::value);
// probability vectors are stored 0-based, so class k lives at index k-1.

#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace ordreg {

struct ProblemSpec {
  int num_classes = 0;
  std::vector<std::string> class_names;  // empty or exactly num_classes

  /// Throws InputError unless K >= 2 and the names (if any) match K.
  void validate() const;
  int num_tasks() const { return num_classes - 1; }
};

struct HardLabel {
  int value = 1;
  auto operator<=>(const HardLabel&) const = default;
};

/// Exact ties at the mode. Classes are 1-based and ascending.
struct Tie {
  std::vector<int> classes;
  bool operator==(const Tie&) const = default;
};

using ModeResult = std::variant<HardLabel, Tie>;

enum class TiePolicy { LowestClass, ReportTie };

enum class SordDistance { Absolute, Squared };

namespace detail {

/// Shared storage for the fixed-meaning probability vectors below.
class ProbabilityVector {
 public:
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

 protected:
  ProbabilityVector() = default;
  explicit ProbabilityVector(std::vector<double> v) : values_(std::move(v)) {}
  std::vector<double> values_;
};

}  // namespace detail

/// Annotator rating distribution over K classes; entries in [0,1] summing
/// to 1 within 1e-9.
class RatingDistribution : public detail::ProbabilityVector {
 public:
  explicit RatingDistribution(std::vector<double> probs);
  int num_classes() const { return static_cast<int>(size()); }
  double prob(HardLabel c) const { return values_[static_cast<std::size_t>(c.value - 1)]; }
  bool operator==(const RatingDistribution& o) const { return values_ == o.values_; }
};

/// Model class distribution f(x); same invariants as RatingDistribution.
class ClassDistribution : public detail::ProbabilityVector {
 public:
  explicit ClassDistribution(std::vector<double> probs);
  int num_classes() const { return static_cast<int>(size()); }
  double prob(HardLabel c) const { return values_[static_cast<std::size_t>(c.value - 1)]; }
  bool operator==(const ClassDistribution& o) const { return values_ == o.values_; }
};

/// K-1 probabilities that the label exceeds rank k, non-increasing in k.
class ExceedanceLabel : public detail::ProbabilityVector {
 public:
  explicit ExceedanceLabel(std::vector<double> exceed);
  bool operator==(const ExceedanceLabel& o) const { return values_ == o.values_; }
};

/// K-1 task outputs P(y > k). Monotonicity is not required.
class TaskProbabilities : public detail::ProbabilityVector {
 public:
  explicit TaskProbabilities(std::vector<double> probs);
  bool is_rank_consistent() const;
};

RatingDistribution soft_label_from_votes(std::span<const HardLabel> votes, const ProblemSpec& spec);

ModeResult hard_label_from_soft(const RatingDistribution& dist, TiePolicy policy);

/// Mode under the lowest-class policy; never a tie.
HardLabel mode_lowest(const RatingDistribution& dist);

ExceedanceLabel exceedance_from_soft(const RatingDistribution& dist);

/// One-hot exceedance, i.e. the indicators [y>1, ..., y>K-1].
ExceedanceLabel exceedance_from_hard(HardLabel y, const ProblemSpec& spec);

/// Adjacent differences of the task probabilities. Negative differences
/// (rank-inconsistent tasks) are clamped to zero and the result
/// renormalized. `clamped`, when given, reports whether that happened.
ClassDistribution class_distribution_from_tasks(const TaskProbabilities& tasks,
                                                bool* clamped = nullptr);

/// Tail sums of a class distribution, P(y > k) for k = 1..K-1.
TaskProbabilities tasks_from_class_distribution(const ClassDistribution& dist);

/// 1 + #{k : tasks[k] > 0.5}.
HardLabel decode_count(const TaskProbabilities& tasks);

ModeResult decode_argmax(const ClassDistribution& dist, TiePolicy policy);
HardLabel decode_argmax(const ClassDistribution& dist);

RatingDistribution sord_soft_label(HardLabel true_class, const ProblemSpec& spec,
                                   SordDistance distance);

/// Throws InputError when y is outside 1..K.
void check_label(HardLabel y, int num_classes);

}  // namespace ordreg

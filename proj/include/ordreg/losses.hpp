#pragma once

// Training objectives as functions of probabilities (post-sigmoid or
// post-softmax). Probabilities are clamped to [kLogEpsilon, 1 - kLogEpsilon]
// before every log.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ordreg/core.hpp"

namespace ordreg {

inline constexpr double kLogEpsilon = 1e-12;

/// CORAL and CORAL-Soft are OrCnn / OrSoft on a shared-slope head.
enum class LossKind { CE, CESoft, OrCnn, OrSoft, Corn, SordAE, SordSE };

enum class Reduction { Mean, Sum };

std::string_view loss_name(LossKind kind);

/// -[t log p + (1-t) log(1-p)] with clamping.
double binary_cross_entropy(double prob, double target);

double or_cnn_loss(const TaskProbabilities& tasks, HardLabel y);
double or_soft_loss(const TaskProbabilities& tasks, const ExceedanceLabel& target);
double ce_loss(const ClassDistribution& dist, HardLabel y);
double ce_soft_loss(const ClassDistribution& dist, const RatingDistribution& target);

/// Batch-level CORN objective over conditional task probabilities. Task k
/// only sees examples with y >= k, target 1(y > k). With Mean reduction the
/// per-task sums are divided by their subset sizes and then summed over
/// tasks; with Sum reduction every selected term is summed. Empty subsets
/// contribute zero.
double corn_loss(std::span<const TaskProbabilities> conditional, std::span<const HardLabel> labels,
                 Reduction reduction = Reduction::Mean);

/// Chain rule: P(y > k) = prod_{j<=k} P(y > j | y > j-1).
TaskProbabilities corn_unconditional(const TaskProbabilities& conditional);

double sord_loss(const ClassDistribution& dist, HardLabel y, const ProblemSpec& spec,
                 SordDistance distance);

/// Entropy of a distribution (clamped logs), the minimum of ce_soft_loss.
double entropy(std::span<const double> probs);

}  // namespace ordreg

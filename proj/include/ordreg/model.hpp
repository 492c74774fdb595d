#pragma once

// A small MLP encoder followed by one of three ordinal/classification heads,
// with exact reverse-mode gradients and an Adam optimizer.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ordreg/core.hpp"
#include "ordreg/losses.hpp"

namespace ordreg {

enum class Activation { ReLU, Tanh };

struct EncoderConfig {
  int input_dim = 1;
  std::vector<int> hidden_dims;  // empty: the head sits directly on the features
  Activation activation = Activation::ReLU;

  void validate() const;
};

enum class HeadKind {
  Independent,      // K-1 separate affine task heads
  SharedSlopeBias,  // one shared affine output plus K-1 free biases
  Softmax,          // K class logits
};

std::string_view head_name(HeadKind head);

/// A contiguous row-major matrix or vector inside ModelParams::values.
struct Block {
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 1;
  std::size_t size() const { return rows * cols; }
};

struct Layer {
  Block weight;  // out x in
  Block bias;    // out (for SharedSlopeBias head: the K-1 task biases)
};

/// All trainable parameters in one flat array. Gradients use the same type.
class ModelParams {
 public:
  ModelParams() = default;
  ModelParams(EncoderConfig encoder, HeadKind head, int num_classes);

  const EncoderConfig& encoder() const { return encoder_; }
  HeadKind head() const { return head_; }
  int num_classes() const { return num_classes_; }
  /// Encoder layers followed by the head layer.
  const std::vector<Layer>& layers() const { return layers_; }
  const Layer& head_layer() const { return layers_.back(); }
  int num_outputs() const { return head_ == HeadKind::Softmax ? num_classes_ : num_classes_ - 1; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  std::span<double> view(const Block& b) { return {values_.data() + b.offset, b.size()}; }
  std::span<const double> view(const Block& b) const { return {values_.data() + b.offset, b.size()}; }

  /// Same layout, all values zero.
  ModelParams zeros_like() const;
  bool same_shape(const ModelParams& other) const;

  bool operator==(const ModelParams& other) const;

 private:
  EncoderConfig encoder_;
  HeadKind head_ = HeadKind::Softmax;
  int num_classes_ = 0;
  std::vector<Layer> layers_;
  std::vector<double> values_;
};

/// Fan-in scaled uniform weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases.
ModelParams init_params(const EncoderConfig& config, HeadKind head, const ProblemSpec& spec,
                        std::uint64_t seed);

/// Head logits: K-1 task logits or K class logits.
std::vector<double> forward(const ModelParams& params, std::span<const double> features);

std::vector<double> sigmoid(std::span<const double> logits);
std::vector<double> softmax(std::span<const double> logits);

/// Targets: HardLabel (CE, OrCnn, Corn, Sord*), RatingDistribution (CESoft),
/// ExceedanceLabel (OrSoft).
using Target = std::variant<HardLabel, RatingDistribution, ExceedanceLabel>;

struct BatchItem {
  std::span<const double> features;
  Target target;
};

struct LossAndGradient {
  double loss = 0.0;
  ModelParams gradient;
};

/// Loss over the batch and its exact gradient. Mean reduction averages
/// per-example losses (each summed over tasks); CORN averages within each
/// task's subset instead.
LossAndGradient loss_and_gradient(const ModelParams& params, std::span<const BatchItem> batch,
                                  LossKind loss, Reduction reduction = Reduction::Mean);

/// Loss value only; the same number loss_and_gradient reports.
double batch_loss(const ModelParams& params, std::span<const BatchItem> batch, LossKind loss,
                  Reduction reduction = Reduction::Mean);

/// Throws InputError unless the head can produce outputs the loss consumes.
void check_head_for_loss(HeadKind head, LossKind loss);

struct AdamState {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  static AdamState for_params(const ModelParams& params, double lr = 1e-5, double beta1 = 0.9,
                              double beta2 = 0.999, double epsilon = 1e-8);
};

/// One bias-corrected Adam update, in place.
void adam_step(ModelParams& params, const ModelParams& grad, AdamState& state);

/// Model output turned into the two prediction views. `tasks` holds
/// unconditional P(y > k) for task heads (chained for CORN) and is empty
/// for the softmax head.
struct Prediction {
  std::optional<TaskProbabilities> tasks;
  ClassDistribution dist;
};

Prediction predict(const ModelParams& params, LossKind loss, std::span<const double> features);

ClassDistribution ensemble_average(std::span<const ClassDistribution> dists);

/// JSON checkpoint holding the layer shapes and the flat parameter array.
std::string params_to_json(const ModelParams& params);
ModelParams params_from_json(const std::string& text);
void save_params(const ModelParams& params, const std::string& path);
ModelParams load_params(const std::string& path);

}  // namespace ordreg

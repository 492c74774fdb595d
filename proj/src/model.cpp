#include "ordreg/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "ordreg/error.hpp"
#include "ordreg/io.hpp"
#include "ordreg/random.hpp"

namespace ordreg {

namespace {

using Json = nlohmann::json;

bool uses_softmax(LossKind loss) {
  return loss == LossKind::CE || loss == LossKind::CESoft || loss == LossKind::SordAE ||
         loss == LossKind::SordSE;
}

double sigmoid1(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double activate(Activation a, double x) {
  return a == Activation::ReLU ? std::max(0.0, x) : std::tanh(x);
}

// Derivative expressed through the activation output.
double activation_slope(Activation a, double pre, double post) {
  if (a == Activation::ReLU) return pre > 0.0 ? 1.0 : 0.0;
  return 1.0 - post * post;
}

struct ForwardCache {
  std::vector<std::vector<double>> pre;   // per encoder layer
  std::vector<std::vector<double>> post;  // post[0] = input, post[l+1] = layer l output
  std::vector<double> logits;
};

void affine(std::span<const double> w, std::span<const double> b, std::size_t rows,
            std::size_t cols, std::span<const double> x, std::vector<double>& out) {
  out.assign(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = b.empty() ? 0.0 : b[r];
    const double* row = w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
}

void run_forward(const ModelParams& params, std::span<const double> features, ForwardCache& cache) {
  if (features.size() != static_cast<std::size_t>(params.encoder().input_dim)) {
    throw InputError("feature length " + std::to_string(features.size()) +
                     " does not match input_dim " + std::to_string(params.encoder().input_dim));
  }
  const auto& layers = params.layers();
  const std::size_t n_encoder = layers.size() - 1;
  cache.pre.resize(n_encoder);
  cache.post.resize(n_encoder + 1);
  cache.post[0].assign(features.begin(), features.end());
  const Activation act = params.encoder().activation;
  for (std::size_t l = 0; l < n_encoder; ++l) {
    const Layer& layer = layers[l];
    affine(params.view(layer.weight), params.view(layer.bias), layer.weight.rows,
           layer.weight.cols, cache.post[l], cache.pre[l]);
    auto& out = cache.post[l + 1];
    out.resize(cache.pre[l].size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = activate(act, cache.pre[l][j]);
  }

  const Layer& head = params.head_layer();
  const auto& hidden = cache.post[n_encoder];
  if (params.head() == HeadKind::SharedSlopeBias) {
    std::vector<double> shared;
    affine(params.view(head.weight), {}, 1, head.weight.cols, hidden, shared);
    const auto bias = params.view(head.bias);
    cache.logits.resize(bias.size());
    for (std::size_t k = 0; k < bias.size(); ++k) cache.logits[k] = shared[0] + bias[k];
  } else {
    affine(params.view(head.weight), params.view(head.bias), head.weight.rows, head.weight.cols,
           hidden, cache.logits);
  }
}

void run_backward(const ModelParams& params, const ForwardCache& cache,
                  std::span<const double> dlogits, ModelParams& grad) {
  const auto& layers = params.layers();
  const std::size_t n_encoder = layers.size() - 1;
  const Layer& head = params.head_layer();
  const auto& hidden = cache.post[n_encoder];
  const std::size_t width = hidden.size();
  std::vector<double> dhidden(width, 0.0);

  auto hw = params.view(head.weight);
  auto ghw = grad.view(head.weight);
  auto ghb = grad.view(head.bias);
  if (params.head() == HeadKind::SharedSlopeBias) {
    double dshared = 0.0;
    for (std::size_t k = 0; k < dlogits.size(); ++k) {
      ghb[k] += dlogits[k];
      dshared += dlogits[k];
    }
    for (std::size_t j = 0; j < width; ++j) {
      ghw[j] += dshared * hidden[j];
      dhidden[j] = hw[j] * dshared;
    }
  } else {
    for (std::size_t r = 0; r < dlogits.size(); ++r) {
      const double d = dlogits[r];
      if (d == 0.0) continue;
      ghb[r] += d;
      for (std::size_t j = 0; j < width; ++j) {
        ghw[r * width + j] += d * hidden[j];
        dhidden[j] += hw[r * width + j] * d;
      }
    }
  }

  const Activation act = params.encoder().activation;
  std::vector<double> dpost = std::move(dhidden);
  for (std::size_t l = n_encoder; l-- > 0;) {
    const Layer& layer = layers[l];
    const auto& pre = cache.pre[l];
    const auto& post = cache.post[l + 1];
    const auto& in = cache.post[l];
    auto w = params.view(layer.weight);
    auto gw = grad.view(layer.weight);
    auto gb = grad.view(layer.bias);
    const std::size_t rows = layer.weight.rows;
    const std::size_t cols = layer.weight.cols;
    std::vector<double> din(l > 0 ? cols : 0, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double d = dpost[r] * activation_slope(act, pre[r], post[r]);
      if (d == 0.0) continue;
      gb[r] += d;
      for (std::size_t c = 0; c < cols; ++c) {
        gw[r * cols + c] += d * in[c];
        if (l > 0) din[c] += w[r * cols + c] * d;
      }
    }
    dpost = std::move(din);
  }
}

std::vector<double> one_hot(HardLabel y, int num_classes) {
  check_label(y, num_classes);
  std::vector<double> t(static_cast<std::size_t>(num_classes), 0.0);
  t[static_cast<std::size_t>(y.value - 1)] = 1.0;
  return t;
}

const HardLabel& hard_target(const Target& target, LossKind loss) {
  if (const auto* y = std::get_if<HardLabel>(&target)) return *y;
  throw InputError(std::string(loss_name(loss)) + " loss needs a hard label target");
}

// Per-example loss and d(loss)/d(logits) for every loss except CORN.
double example_loss(const ModelParams& params, const std::vector<double>& logits,
                    const Target& target, LossKind loss, std::vector<double>& dlogits) {
  const int k_classes = params.num_classes();
  const ProblemSpec spec{k_classes, {}};
  if (uses_softmax(loss)) {
    const ClassDistribution dist(softmax(logits));
    std::vector<double> t;
    double value = 0.0;
    switch (loss) {
      case LossKind::CE: {
        const HardLabel y = hard_target(target, loss);
        value = ce_loss(dist, y);
        t = one_hot(y, k_classes);
        break;
      }
      case LossKind::CESoft: {
        const auto* soft = std::get_if<RatingDistribution>(&target);
        if (soft == nullptr) throw InputError("ce_soft loss needs a rating distribution target");
        if (soft->num_classes() != k_classes) throw InputError("target class count mismatch");
        value = ce_soft_loss(dist, *soft);
        t = soft->values();
        break;
      }
      default: {
        const auto distance =
            loss == LossKind::SordAE ? SordDistance::Absolute : SordDistance::Squared;
        const auto smooth = sord_soft_label(hard_target(target, loss), spec, distance);
        value = ce_soft_loss(dist, smooth);
        t = smooth.values();
        break;
      }
    }
    dlogits.resize(dist.size());
    for (std::size_t k = 0; k < dist.size(); ++k) dlogits[k] = dist[k] - t[k];
    return value;
  }

  const TaskProbabilities tasks(sigmoid(logits));
  std::vector<double> e;
  double value = 0.0;
  if (loss == LossKind::OrCnn) {
    const HardLabel y = hard_target(target, loss);
    value = or_cnn_loss(tasks, y);
    e = exceedance_from_hard(y, spec).values();
  } else if (loss == LossKind::OrSoft) {
    const auto* ex = std::get_if<ExceedanceLabel>(&target);
    if (ex == nullptr) throw InputError("or_soft loss needs an exceedance label target");
    value = or_soft_loss(tasks, *ex);
    e = ex->values();
  } else {
    throw InputError("unsupported loss in per-example path");
  }
  dlogits.resize(tasks.size());
  for (std::size_t k = 0; k < tasks.size(); ++k) dlogits[k] = tasks[k] - e[k];
  return value;
}

LossAndGradient evaluate(const ModelParams& params, std::span<const BatchItem> batch,
                         LossKind loss, Reduction reduction, bool want_gradient) {
  if (batch.empty()) throw InputError("loss over an empty batch");
  check_head_for_loss(params.head(), loss);
  LossAndGradient out;
  if (want_gradient) out.gradient = params.zeros_like();
  ForwardCache cache;
  std::vector<double> dlogits;

  if (loss == LossKind::Corn) {
    const std::size_t n = batch.size();
    std::vector<ForwardCache> caches(n);
    std::vector<TaskProbabilities> conditional;
    std::vector<HardLabel> labels;
    conditional.reserve(n);
    labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      run_forward(params, batch[i].features, caches[i]);
      conditional.emplace_back(sigmoid(caches[i].logits));
      labels.push_back(hard_target(batch[i].target, loss));
    }
    out.loss = corn_loss(conditional, labels, reduction);
    if (!want_gradient) return out;
    const std::size_t tasks = static_cast<std::size_t>(params.num_classes() - 1);
    std::vector<std::size_t> subset(tasks, 0);
    for (const HardLabel& y : labels) {
      for (std::size_t k = 0; k < tasks && y.value >= static_cast<int>(k) + 1; ++k) ++subset[k];
    }
    for (std::size_t i = 0; i < n; ++i) {
      dlogits.assign(tasks, 0.0);
      for (std::size_t k = 0; k < tasks && labels[i].value >= static_cast<int>(k) + 1; ++k) {
        const double t = labels[i].value > static_cast<int>(k) + 1 ? 1.0 : 0.0;
        const double scale =
            reduction == Reduction::Mean ? 1.0 / static_cast<double>(subset[k]) : 1.0;
        dlogits[k] = (conditional[i][k] - t) * scale;
      }
      run_backward(params, caches[i], dlogits, out.gradient);
    }
    return out;
  }

  const double scale =
      reduction == Reduction::Mean ? 1.0 / static_cast<double>(batch.size()) : 1.0;
  double total = 0.0;
  for (const BatchItem& item : batch) {
    run_forward(params, item.features, cache);
    total += example_loss(params, cache.logits, item.target, loss, dlogits);
    if (want_gradient) {
      for (double& d : dlogits) d *= scale;
      run_backward(params, cache, dlogits, out.gradient);
    }
  }
  out.loss = total * scale;
  return out;
}

Json encoder_to_json(const EncoderConfig& e) {
  return Json{{"input_dim", e.input_dim},
              {"hidden_dims", e.hidden_dims},
              {"activation", e.activation == Activation::ReLU ? "relu" : "tanh"}};
}

HeadKind head_from_name(const std::string& s) {
  if (s == "independent") return HeadKind::Independent;
  if (s == "shared_slope_bias") return HeadKind::SharedSlopeBias;
  if (s == "softmax") return HeadKind::Softmax;
  throw InputError("unknown head kind '" + s + "'");
}

}  // namespace

void EncoderConfig::validate() const {
  if (input_dim < 1) throw InputError("encoder input_dim must be >= 1");
  for (int h : hidden_dims) {
    if (h < 1) throw InputError("encoder hidden dims must be >= 1");
  }
}

std::string_view head_name(HeadKind head) {
  switch (head) {
    case HeadKind::Independent: return "independent";
    case HeadKind::SharedSlopeBias: return "shared_slope_bias";
    case HeadKind::Softmax: return "softmax";
  }
  return "unknown";
}

ModelParams::ModelParams(EncoderConfig encoder, HeadKind head, int num_classes)
    : encoder_(std::move(encoder)), head_(head), num_classes_(num_classes) {
  encoder_.validate();
  ProblemSpec{num_classes, {}}.validate();
  std::size_t offset = 0;
  auto add = [&](std::size_t rows, std::size_t cols) {
    Block b{offset, rows, cols};
    offset += b.size();
    return b;
  };
  std::size_t in = static_cast<std::size_t>(encoder_.input_dim);
  for (int h : encoder_.hidden_dims) {
    const auto out = static_cast<std::size_t>(h);
    Layer layer;
    layer.weight = add(out, in);
    layer.bias = add(out, 1);
    layers_.push_back(layer);
    in = out;
  }
  Layer head_layer;
  const auto outputs = static_cast<std::size_t>(num_outputs());
  if (head_ == HeadKind::SharedSlopeBias) {
    head_layer.weight = add(1, in);
    head_layer.bias = add(outputs, 1);
  } else {
    head_layer.weight = add(outputs, in);
    head_layer.bias = add(outputs, 1);
  }
  layers_.push_back(head_layer);
  values_.assign(offset, 0.0);
}

ModelParams ModelParams::zeros_like() const {
  ModelParams out = *this;
  std::fill(out.values_.begin(), out.values_.end(), 0.0);
  return out;
}

bool ModelParams::same_shape(const ModelParams& other) const {
  return encoder_.input_dim == other.encoder_.input_dim &&
         encoder_.hidden_dims == other.encoder_.hidden_dims && head_ == other.head_ &&
         num_classes_ == other.num_classes_ && values_.size() == other.values_.size();
}

bool ModelParams::operator==(const ModelParams& other) const {
  return same_shape(other) && encoder_.activation == other.encoder_.activation &&
         values_ == other.values_;
}

ModelParams init_params(const EncoderConfig& config, HeadKind head, const ProblemSpec& spec,
                        std::uint64_t seed) {
  spec.validate();
  ModelParams params(config, head, spec.num_classes);
  Rng rng(derive_seed(seed, "init_params"));
  for (const Layer& layer : params.layers()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols));
    for (double& w : params.view(layer.weight)) w = rng.uniform(-bound, bound);
  }
  return params;
}

std::vector<double> forward(const ModelParams& params, std::span<const double> features) {
  ForwardCache cache;
  run_forward(params, features, cache);
  return cache.logits;
}

std::vector<double> sigmoid(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  std::transform(logits.begin(), logits.end(), out.begin(), sigmoid1);
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - top);
    total += out[k];
  }
  for (double& v : out) v /= total;
  return out;
}

void check_head_for_loss(HeadKind head, LossKind loss) {
  const bool softmax_head = head == HeadKind::Softmax;
  if (softmax_head != uses_softmax(loss)) {
    throw InputError(std::string(loss_name(loss)) + " loss cannot train a " +
                     std::string(head_name(head)) + " head");
  }
}

LossAndGradient loss_and_gradient(const ModelParams& params, std::span<const BatchItem> batch,
                                  LossKind loss, Reduction reduction) {
  return evaluate(params, batch, loss, reduction, true);
}

double batch_loss(const ModelParams& params, std::span<const BatchItem> batch, LossKind loss,
                  Reduction reduction) {
  return evaluate(params, batch, loss, reduction, false).loss;
}

AdamState AdamState::for_params(const ModelParams& params, double lr, double beta1, double beta2,
                                double epsilon) {
  AdamState s;
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  s.m.assign(params.values().size(), 0.0);
  s.v.assign(params.values().size(), 0.0);
  return s;
}

void adam_step(ModelParams& params, const ModelParams& grad, AdamState& state) {
  auto& p = params.values();
  const auto& g = grad.values();
  if (g.size() != p.size() || state.m.size() != p.size() || state.v.size() != p.size()) {
    throw InputError("adam_step: shape mismatch");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < p.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g[i] * g[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

Prediction predict(const ModelParams& params, LossKind loss, std::span<const double> features) {
  check_head_for_loss(params.head(), loss);
  const auto logits = forward(params, features);
  if (params.head() == HeadKind::Softmax) {
    return Prediction{std::nullopt, ClassDistribution(softmax(logits))};
  }
  TaskProbabilities tasks(sigmoid(logits));
  if (loss == LossKind::Corn) tasks = corn_unconditional(tasks);
  ClassDistribution dist = class_distribution_from_tasks(tasks);
  return Prediction{std::move(tasks), std::move(dist)};
}

ClassDistribution ensemble_average(std::span<const ClassDistribution> dists) {
  if (dists.empty()) throw InputError("ensemble_average needs at least one member");
  const std::size_t k = dists.front().size();
  std::vector<double> mean(k, 0.0);
  for (const auto& d : dists) {
    if (d.size() != k) throw InputError("ensemble_average: class count mismatch");
    for (std::size_t j = 0; j < k; ++j) mean[j] += d[j];
  }
  if (dists.size() > 1) {
    for (double& v : mean) v /= static_cast<double>(dists.size());
  }
  return ClassDistribution(std::move(mean));
}

std::string params_to_json(const ModelParams& params) {
  Json j;
  j["format"] = "ordreg-params";
  j["version"] = 1;
  j["encoder"] = encoder_to_json(params.encoder());
  j["head"] = std::string(head_name(params.head()));
  j["num_classes"] = params.num_classes();
  j["values"] = params.values();
  return j.dump(1);
}

ModelParams params_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InputError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != "ordreg-params" || j.value("version", 0) != 1) {
    throw InputError("not an ordreg-params v1 checkpoint");
  }
  EncoderConfig enc;
  enc.input_dim = j.at("encoder").at("input_dim").get<int>();
  enc.hidden_dims = j.at("encoder").at("hidden_dims").get<std::vector<int>>();
  const auto act = j.at("encoder").at("activation").get<std::string>();
  if (act != "relu" && act != "tanh") throw InputError("unknown activation '" + act + "'");
  enc.activation = act == "relu" ? Activation::ReLU : Activation::Tanh;
  ModelParams params(enc, head_from_name(j.at("head").get<std::string>()),
                     j.at("num_classes").get<int>());
  auto values = j.at("values").get<std::vector<double>>();
  if (values.size() != params.values().size()) {
    throw InputError("checkpoint holds " + std::to_string(values.size()) + " values, layout needs " +
                     std::to_string(params.values().size()));
  }
  params.values() = std::move(values);
  return params;
}

void save_params(const ModelParams& params, const std::string& path) {
  write_file_atomic(path, params_to_json(params));
}

ModelParams load_params(const std::string& path) { return params_from_json(read_file(path)); }

}  // namespace ordreg

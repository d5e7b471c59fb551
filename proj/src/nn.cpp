#include "fednam/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fednam/rng.hpp"

namespace fednam {

namespace {

double clamp_logit(double z) { return std::clamp(z, -kLogitClamp, kLogitClamp); }

std::vector<std::size_t> signature(const Mlp& mlp) {
  std::vector<std::size_t> sig;
  sig.reserve(mlp.layers.size() + 2);
  sig.push_back(mlp.layers.size());
  if (!mlp.layers.empty()) sig.push_back(mlp.layers.front().in_dim());
  for (const auto& layer : mlp.layers) sig.push_back(layer.out_dim());
  return sig;
}

void affine(const LayerParams& layer, ActivationKind kind, std::span<const double> x, std::vector<double>& out) {
  const std::size_t out_dim = layer.out_dim();
  const std::size_t in_dim = layer.in_dim();
  out.resize(out_dim);
  for (std::size_t j = 0; j < out_dim; ++j) {
    const auto w = layer.weights.row(j);
    double acc = 0.0;
    if (kind == ActivationKind::ExU) {
      const double b = layer.biases[j];
      for (std::size_t i = 0; i < in_dim; ++i) acc += std::exp(w[i]) * (x[i] - b);
    } else {
      for (std::size_t i = 0; i < in_dim; ++i) acc += w[i] * x[i];
      acc += layer.biases[j];
    }
    out[j] = acc;
  }
}

void activate(ActivationKind kind, const std::vector<double>& pre, std::vector<double>& out) {
  out.resize(pre.size());
  switch (kind) {
    case ActivationKind::ReLU:
      for (std::size_t j = 0; j < pre.size(); ++j) out[j] = pre[j] < 0.0 ? 0.0 : pre[j];  // NaN propagates
      break;
    case ActivationKind::ExU:
      for (std::size_t j = 0; j < pre.size(); ++j) out[j] = std::clamp(pre[j], 0.0, 1.0);
      break;
    case ActivationKind::Identity:
      out = pre;
      break;
    case ActivationKind::Sigmoid:
      for (std::size_t j = 0; j < pre.size(); ++j) out[j] = sigmoid(pre[j]);
      break;
    case ActivationKind::Softmax:
      out = softmax(pre);
      break;
  }
}

// dL/dpre from dL/dact (in-place on g).
void activation_backward(ActivationKind kind, const std::vector<double>& pre, std::vector<double>& g) {
  switch (kind) {
    case ActivationKind::ReLU:
      for (std::size_t j = 0; j < g.size(); ++j)
        if (!(pre[j] > 0.0)) g[j] = 0.0;
      break;
    case ActivationKind::ExU:
      for (std::size_t j = 0; j < g.size(); ++j)
        if (!(pre[j] > 0.0 && pre[j] < 1.0)) g[j] = 0.0;
      break;
    case ActivationKind::Identity:
      break;
    case ActivationKind::Sigmoid:
      for (std::size_t j = 0; j < g.size(); ++j) {
        const double s = sigmoid(pre[j]);
        g[j] *= s * (1.0 - s);
      }
      break;
    case ActivationKind::Softmax: {
      const auto s = softmax(pre);
      double dot = 0.0;
      for (std::size_t j = 0; j < g.size(); ++j) dot += s[j] * g[j];
      for (std::size_t j = 0; j < g.size(); ++j) g[j] = s[j] * (g[j] - dot);
      break;
    }
  }
}

template <class Span, class Source>
std::vector<Span> tensors_of(Source& layers) {
  std::vector<Span> out;
  out.reserve(layers.size() * 2);
  for (auto& layer : layers) {
    out.emplace_back(layer.weights.values());
    out.emplace_back(layer.biases);
  }
  return out;
}

}  // namespace

std::string_view to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::ReLU: return "relu";
    case ActivationKind::ExU: return "exu";
    case ActivationKind::Identity: return "identity";
    case ActivationKind::Sigmoid: return "sigmoid";
    case ActivationKind::Softmax: return "softmax";
  }
  return "unknown";
}

ActivationKind activation_from_string(std::string_view name) {
  for (auto kind : {ActivationKind::ReLU, ActivationKind::ExU, ActivationKind::Identity, ActivationKind::Sigmoid,
                    ActivationKind::Softmax}) {
    if (to_string(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Task task) { return task == Task::Binary ? "binary" : "multiclass"; }

Task task_from_string(std::string_view name) {
  if (name == "binary") return Task::Binary;
  if (name == "multiclass") return Task::Multiclass;
  throw std::invalid_argument("unknown task '" + std::string(name) + "'");
}

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::SGD ? "sgd" : "adam"; }

OptimizerKind optimizer_from_string(std::string_view name) {
  if (name == "sgd") return OptimizerKind::SGD;
  if (name == "adam") return OptimizerKind::Adam;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

LayerParams xavier_init(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed) {
  if (in_dim == 0 || out_dim == 0) throw ShapeError("xavier_init: dimensions must be >= 1");
  LayerParams layer(in_dim, out_dim);
  const double bound = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  Rng rng(seed);
  for (double& w : layer.weights.values()) w = rng.uniform(-bound, bound);
  return layer;
}

void Mlp::validate() const {
  if (layers.empty()) throw ShapeError("mlp has no layers");
  if (activations.size() != layers.size()) throw ShapeError("mlp needs one activation per layer");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ShapeError("dropout rate must lie in [0,1)");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].biases.size() != layers[l].out_dim()) throw ShapeError("bias length != out_dim");
    if (l + 1 < layers.size() && layers[l].out_dim() != layers[l + 1].in_dim()) {
      throw ShapeError("layer " + std::to_string(l) + " out_dim does not match layer " + std::to_string(l + 1) +
                       " in_dim");
    }
  }
}

Mlp make_mlp(std::span<const std::size_t> dims, ActivationKind first_hidden, ActivationKind hidden,
             ActivationKind output, double dropout_rate, std::uint64_t seed) {
  if (dims.size() < 2) throw ShapeError("make_mlp needs at least input and output dims");
  Mlp mlp;
  mlp.dropout_rate = dropout_rate;
  const std::size_t n_layers = dims.size() - 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    mlp.layers.push_back(xavier_init(dims[l], dims[l + 1], derive_seed(seed, {l})));
    if (l + 1 == n_layers) {
      mlp.activations.push_back(output);
    } else {
      mlp.activations.push_back(l == 0 ? first_hidden : hidden);
    }
  }
  mlp.validate();
  return mlp;
}

const std::vector<double>& forward(const Mlp& mlp, std::span<const double> input, Mode mode, std::uint64_t seed,
                                   ForwardCache& cache) {
  if (mlp.layers.empty()) throw ShapeError("forward: empty network");
  if (input.size() != mlp.in_dim()) {
    throw ShapeError("forward: input length " + std::to_string(input.size()) + " != in_dim " +
                     std::to_string(mlp.in_dim()));
  }
  const std::size_t n = mlp.layers.size();
  cache.inputs.resize(n);
  cache.pre.resize(n);
  cache.post.resize(n);
  cache.masks.resize(n);
  const bool use_dropout = mode == Mode::Train && mlp.dropout_rate > 0.0;
  const double keep_scale = use_dropout ? 1.0 / (1.0 - mlp.dropout_rate) : 1.0;
  Rng rng(seed);

  cache.inputs[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < n; ++l) {
    if (l > 0) cache.inputs[l] = cache.post[l - 1];
    affine(mlp.layers[l], mlp.activations[l], cache.inputs[l], cache.pre[l]);
    activate(mlp.activations[l], cache.pre[l], cache.post[l]);
    auto& mask = cache.masks[l];
    if (use_dropout && l + 1 < n) {
      mask.resize(cache.post[l].size());
      for (std::size_t j = 0; j < mask.size(); ++j) {
        mask[j] = rng.uniform() < mlp.dropout_rate ? 0.0 : keep_scale;
        cache.post[l][j] *= mask[j];
      }
    } else {
      mask.clear();
    }
  }
  cache.shape = signature(mlp);
  cache.filled = true;
  return cache.post.back();
}

ForwardResult forward(const Mlp& mlp, std::span<const double> input, Mode mode, std::uint64_t seed) {
  ForwardResult result;
  result.output = forward(mlp, input, mode, seed, result.cache);
  return result;
}

std::vector<double> predict(const Mlp& mlp, std::span<const double> input) {
  ForwardCache cache;
  return forward(mlp, input, Mode::Infer, 0, cache);
}

MlpGradients MlpGradients::zeros_like(const Mlp& mlp) {
  MlpGradients g;
  g.layers.reserve(mlp.layers.size());
  for (const auto& layer : mlp.layers) g.layers.emplace_back(layer.in_dim(), layer.out_dim());
  return g;
}

void MlpGradients::set_zero() {
  for (auto& layer : layers) {
    std::fill(layer.weights.values().begin(), layer.weights.values().end(), 0.0);
    std::fill(layer.biases.begin(), layer.biases.end(), 0.0);
  }
}

void backward_accumulate(const Mlp& mlp, const ForwardCache& cache, std::span<const double> output_grad,
                         MlpGradients& grads, std::vector<double>* input_grad) {
  if (!cache.filled) throw ShapeError("backward: cache was never filled by forward");
  if (cache.shape != signature(mlp)) throw ShapeError("backward: cache belongs to a different network");
  if (output_grad.size() != mlp.out_dim()) throw ShapeError("backward: output_grad length != out_dim");
  if (grads.layers.size() != mlp.layers.size()) throw ShapeError("backward: gradient buffer mismatch");

  std::vector<double> g(output_grad.begin(), output_grad.end());
  std::vector<double> g_in;
  for (std::size_t l = mlp.layers.size(); l-- > 0;) {
    const auto& layer = mlp.layers[l];
    const auto kind = mlp.activations[l];
    const auto& x = cache.inputs[l];
    const auto& mask = cache.masks[l];
    if (!mask.empty()) {
      for (std::size_t j = 0; j < g.size(); ++j) g[j] *= mask[j];
    }
    activation_backward(kind, cache.pre[l], g);

    auto& gl = grads.layers[l];
    const std::size_t in_dim = layer.in_dim();
    const bool need_input = l > 0 || input_grad != nullptr;
    g_in.assign(in_dim, 0.0);
    for (std::size_t j = 0; j < layer.out_dim(); ++j) {
      const double gj = g[j];
      if (gj == 0.0) continue;
      const auto w = layer.weights.row(j);
      auto gw = gl.weights.row(j);
      if (kind == ActivationKind::ExU) {
        const double b = layer.biases[j];
        double exp_sum = 0.0;
        for (std::size_t i = 0; i < in_dim; ++i) {
          const double e = std::exp(w[i]);
          gw[i] += gj * e * (x[i] - b);
          exp_sum += e;
          if (need_input) g_in[i] += gj * e;
        }
        gl.biases[j] -= gj * exp_sum;
      } else {
        for (std::size_t i = 0; i < in_dim; ++i) {
          gw[i] += gj * x[i];
          if (need_input) g_in[i] += gj * w[i];
        }
        gl.biases[j] += gj;
      }
    }
    g.swap(g_in);
  }
  if (input_grad != nullptr) *input_grad = std::move(g);
}

BackwardResult backward(const Mlp& mlp, const ForwardCache& cache, std::span<const double> output_grad) {
  BackwardResult result{MlpGradients::zeros_like(mlp), {}};
  backward_accumulate(mlp, cache, output_grad, result.grads, &result.input_grad);
  return result;
}

double sigmoid(double z) {
  const double c = clamp_logit(z);
  if (c >= 0.0) return 1.0 / (1.0 + std::exp(-c));
  const double e = std::exp(c);
  return e / (1.0 + e);
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  double max_z = -kLogitClamp;
  for (double z : logits) max_z = std::max(max_z, clamp_logit(z));
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(clamp_logit(logits[i]) - max_z);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

LossResult loss_and_grad(std::span<const double> logits, int target, Task task) {
  LossResult result;
  if (task == Task::Binary) {
    if (logits.size() != 1) throw ShapeError("binary loss expects exactly one logit");
    if (target != 0 && target != 1) throw std::out_of_range("binary target must be 0 or 1");
    const double z = clamp_logit(logits[0]);
    const double y = static_cast<double>(target);
    // softplus(z) - y*z, written to avoid overflow for either sign of z
    result.loss = std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::abs(z)));
    result.grad = {sigmoid(z) - y};
    return result;
  }
  if (logits.size() < 2) throw ShapeError("multiclass loss expects at least two logits");
  if (target < 0 || static_cast<std::size_t>(target) >= logits.size()) {
    throw std::out_of_range("multiclass target outside [0, C)");
  }
  double max_z = -kLogitClamp;
  for (double z : logits) max_z = std::max(max_z, clamp_logit(z));
  double total = 0.0;
  for (double z : logits) total += std::exp(clamp_logit(z) - max_z);
  const double log_norm = max_z + std::log(total);
  result.loss = log_norm - clamp_logit(logits[static_cast<std::size_t>(target)]);
  result.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    result.grad[i] = std::exp(clamp_logit(logits[i]) - log_norm) - (static_cast<int>(i) == target ? 1.0 : 0.0);
  }
  return result;
}

void optimizer_step(OptimizerState& state, std::span<const std::span<double>> params,
                    std::span<const std::span<const double>> grads) {
  if (params.size() != grads.size()) throw ShapeError("optimizer_step: tensor count mismatch");
  if (!(std::isfinite(state.learning_rate) && state.learning_rate >= 0.0)) {
    throw ConfigError("optimizer_step: learning rate must be finite and non-negative");
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].size() != grads[t].size()) throw ShapeError("optimizer_step: tensor shape mismatch");
    for (double g : grads[t]) {
      if (!std::isfinite(g)) throw NonFiniteError("optimizer_step: non-finite gradient");
    }
  }

  const double lr = state.learning_rate;
  ++state.step;
  if (state.kind == OptimizerKind::SGD) {
    for (std::size_t t = 0; t < params.size(); ++t) {
      for (std::size_t i = 0; i < params[t].size(); ++i) params[t][i] -= lr * grads[t][i];
    }
    return;
  }

  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t t = 0; t < params.size(); ++t) {
      state.m[t].assign(params[t].size(), 0.0);
      state.v[t].assign(params[t].size(), 0.0);
    }
  } else if (state.m.size() != params.size()) {
    throw ShapeError("optimizer_step: Adam moments do not match the parameter set");
  }
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != params[k].size()) throw ShapeError("optimizer_step: Adam moment shape mismatch");
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      const double g = grads[k][i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      params[k][i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

std::vector<std::span<double>> parameter_tensors(Mlp& mlp) { return tensors_of<std::span<double>>(mlp.layers); }

std::vector<std::span<const double>> parameter_tensors(const Mlp& mlp) {
  return tensors_of<std::span<const double>>(mlp.layers);
}

std::vector<std::span<double>> parameter_tensors(MlpGradients& grads) {
  return tensors_of<std::span<double>>(grads.layers);
}

std::vector<std::span<const double>> parameter_tensors(const MlpGradients& grads) {
  return tensors_of<std::span<const double>>(grads.layers);
}

bool same_architecture(const Mlp& a, const Mlp& b) {
  return a.activations == b.activations && signature(a) == signature(b);
}

}  // namespace fednam

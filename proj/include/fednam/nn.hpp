#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "fednam/matrix.hpp"

namespace fednam {

enum class ActivationKind { ReLU, ExU, Identity, Sigmoid, Softmax };
enum class Mode { Train, Infer };
enum class Task { Binary, Multiclass };

std::string_view to_string(ActivationKind kind);
ActivationKind activation_from_string(std::string_view name);
std::string_view to_string(Task task);
Task task_from_string(std::string_view name);

/// Logits are clamped to this range before any exponential.
inline constexpr double kLogitClamp = 30.0;

/// Weights (out_dim x in_dim) and biases (out_dim) of one dense layer.
///
/// For an ExU layer the same storage is read as unit j computing
/// sum_i exp(w_ji) * (x_i - b_j), followed by a ReLU capped at 1.
struct LayerParams {
  Matrix weights;
  std::vector<double> biases;

  LayerParams() = default;
  LayerParams(std::size_t in_dim, std::size_t out_dim) : weights(out_dim, in_dim), biases(out_dim, 0.0) {}

  std::size_t in_dim() const noexcept { return weights.cols(); }
  std::size_t out_dim() const noexcept { return weights.rows(); }

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

/// Xavier/Glorot uniform: weights ~ U(-sqrt(6/(in+out)), +sqrt(6/(in+out))), zero biases.
LayerParams xavier_init(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed);

/// Plain feed-forward network. Dropout (inverted) is applied after every
/// hidden activation in Train mode and never after the output layer.
struct Mlp {
  std::vector<LayerParams> layers;
  std::vector<ActivationKind> activations;
  double dropout_rate = 0.0;

  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }

  /// Throws ShapeError if consecutive layer dims do not chain or activations are missing.
  void validate() const;

  friend bool operator==(const Mlp&, const Mlp&) = default;
};

/// Builds an Mlp with layer sizes dims[0] -> dims[1] -> ... -> dims.back(), Xavier initialized.
/// `first_hidden` lets the first hidden layer differ (ExU), the remaining hidden layers use `hidden`.
Mlp make_mlp(std::span<const std::size_t> dims, ActivationKind first_hidden, ActivationKind hidden,
             ActivationKind output, double dropout_rate, std::uint64_t seed);

/// Per-layer trace of a forward pass; reused across calls to avoid reallocations.
struct ForwardCache {
  std::vector<std::vector<double>> inputs;  // input seen by each layer
  std::vector<std::vector<double>> pre;     // affine output
  std::vector<std::vector<double>> post;    // activation output after dropout scaling
  std::vector<std::vector<double>> masks;   // dropout scale (0 or 1/(1-p)); empty when unused
  std::vector<std::size_t> shape;           // signature of the network that produced the trace
  bool filled = false;

  const std::vector<double>& output() const { return post.back(); }
};

/// Forward pass writing its trace into `cache`; returns the network output.
/// Train mode draws dropout masks from `seed`; Infer mode ignores both.
const std::vector<double>& forward(const Mlp& mlp, std::span<const double> input, Mode mode, std::uint64_t seed,
                                   ForwardCache& cache);

struct ForwardResult {
  std::vector<double> output;
  ForwardCache cache;
};
ForwardResult forward(const Mlp& mlp, std::span<const double> input, Mode mode = Mode::Infer,
                      std::uint64_t seed = 0);

/// Inference-only forward without a retained trace.
std::vector<double> predict(const Mlp& mlp, std::span<const double> input);

/// Gradient buffers shaped like the network's parameters.
struct MlpGradients {
  std::vector<LayerParams> layers;

  static MlpGradients zeros_like(const Mlp& mlp);
  void set_zero();
};

/// Reverse pass: adds dL/dparams into `grads` and, if `input_grad` is non-null,
/// writes dL/dinput into it. Throws ShapeError on an empty or mismatched cache.
void backward_accumulate(const Mlp& mlp, const ForwardCache& cache, std::span<const double> output_grad,
                         MlpGradients& grads, std::vector<double>* input_grad = nullptr);

struct BackwardResult {
  MlpGradients grads;
  std::vector<double> input_grad;
};
BackwardResult backward(const Mlp& mlp, const ForwardCache& cache, std::span<const double> output_grad);

/// Numerically stable probabilities from clamped logits.
double sigmoid(double z);
std::vector<double> softmax(std::span<const double> logits);

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;  // dLoss/dLogits
};

/// Sigmoid cross-entropy (Binary, one logit) or softmax cross-entropy (Multiclass).
/// Throws std::out_of_range for an invalid target and ShapeError for a bad logit count.
LossResult loss_and_grad(std::span<const double> logits, int target, Task task);

enum class OptimizerKind { SGD, Adam };
std::string_view to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(std::string_view name);

/// Optimizer hyperparameters plus Adam moment buffers (one per parameter tensor).
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

/// One update of every tensor in `params` using the matching tensor in `grads`.
/// Rejects (NonFiniteError) non-finite gradients before touching any parameter;
/// ShapeError if the tensor lists do not align.
void optimizer_step(OptimizerState& state, std::span<const std::span<double>> params,
                    std::span<const std::span<const double>> grads);

/// Views over every parameter tensor, in a fixed order (per layer: weights, biases).
std::vector<std::span<double>> parameter_tensors(Mlp& mlp);
std::vector<std::span<const double>> parameter_tensors(const Mlp& mlp);
std::vector<std::span<double>> parameter_tensors(MlpGradients& grads);
std::vector<std::span<const double>> parameter_tensors(const MlpGradients& grads);

bool same_architecture(const Mlp& a, const Mlp& b);

}  // namespace fednam

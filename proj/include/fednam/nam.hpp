#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fednam/matrix.hpp"
#include "fednam/nn.hpp"

namespace fednam {

struct NamConfig {
  std::size_t hidden_layers = 3;
  std::size_t hidden_units = 20;
  /// ReLU or ExU. With ExU only the first hidden layer is ExU; deeper hidden layers stay ReLU.
  ActivationKind unit = ActivationKind::ReLU;
  double dropout = 0.0;
};

/// Univariate subnetwork: 1 -> hidden... -> 1.
struct FeatureNet {
  std::size_t feature_index = 0;
  Mlp mlp;

  double evaluate(double x) const;

  friend bool operator==(const FeatureNet&, const FeatureNet&) = default;
};

/// Additive model: logit_c(x) = bias_c + sum_k output_weights(c,k) * f_k(x_k).
struct NamModel {
  Task task = Task::Binary;
  std::vector<std::string> feature_names;
  std::vector<FeatureNet> nets;
  Matrix output_weights;  // num_outputs x num_features
  std::vector<double> output_bias;

  std::size_t num_features() const noexcept { return nets.size(); }
  std::size_t num_outputs() const noexcept { return output_bias.size(); }

  /// Checks every additivity-relevant shape invariant; throws ShapeError.
  void validate() const;

  /// The interpretable per-class shape g_{c,k}(x) = output_weights(c,k) * f_k(x).
  double effective_shape(std::size_t k, std::size_t c, double x) const;

  friend bool operator==(const NamModel&, const NamModel&) = default;
};

/// Fresh model with Xavier-initialized feature nets and output head.
/// `num_classes` is 2 for Binary (one logit) or C for Multiclass (C logits).
NamModel make_nam(std::vector<std::string> feature_names, Task task, std::size_t num_classes, const NamConfig& config,
                  std::uint64_t seed);

struct NamCache {
  std::vector<ForwardCache> nets;
  std::vector<double> feature_outputs;  // f_k(x_k)
  std::size_t num_features = 0;
  std::size_t num_outputs = 0;
  bool filled = false;
};

struct NamForward {
  std::vector<double> logits;
  Matrix terms;  // num_outputs x num_features
  NamCache cache;
};

/// Forward pass with exact per-feature decomposition. Feature net k draws its dropout
/// mask from derive_seed(seed, {k}).
NamForward nam_forward(const NamModel& model, std::span<const double> x, Mode mode = Mode::Infer,
                       std::uint64_t seed = 0);

/// Allocation-reusing variant for training loops; `logits` is resized to num_outputs.
void nam_forward_into(const NamModel& model, std::span<const double> x, Mode mode, std::uint64_t seed,
                      NamCache& cache, std::vector<double>& logits);

/// Gradients shaped like a NamModel.
struct NamGradients {
  std::vector<MlpGradients> nets;
  Matrix output_weights;
  std::vector<double> output_bias;

  static NamGradients zeros_like(const NamModel& model);
  void set_zero();
};

/// Adds parameter gradients into `grads`; optional dLoss/dx in `input_grad`.
void nam_backward_accumulate(const NamModel& model, const NamCache& cache, std::span<const double> logit_grad,
                             NamGradients& grads, std::vector<double>* input_grad = nullptr);

struct NamBackward {
  NamGradients grads;
  std::vector<double> input_grad;
};
NamBackward nam_backward(const NamModel& model, const NamCache& cache, std::span<const double> logit_grad);

/// Inverse link: sigmoid for Binary (one probability, of class 1), softmax for Multiclass.
std::vector<double> predict_proba(const NamModel& model, std::span<const double> x);
std::vector<double> logits_to_proba(std::span<const double> logits, Task task);

struct FeatureTerm {
  std::size_t feature_index = 0;
  std::string name;
  std::vector<double> per_class;  // term value for each logit
};

struct Decomposition {
  std::vector<FeatureTerm> terms;  // in feature order
  std::vector<double> bias;
  std::vector<double> logits;
  /// Feature indices sorted by descending max_c |term|; ties keep feature order.
  std::vector<std::size_t> ranking;
};

Decomposition decompose_prediction(const NamModel& model, std::span<const double> x);

std::vector<std::span<double>> parameter_tensors(NamModel& model);
std::vector<std::span<const double>> parameter_tensors(const NamModel& model);
std::vector<std::span<double>> parameter_tensors(NamGradients& grads);
std::vector<std::span<const double>> parameter_tensors(const NamGradients& grads);

bool same_architecture(const NamModel& a, const NamModel& b);

inline constexpr int kModelSchemaVersion = 1;

/// JSON document with schema_version, task, feature_names, per-net layer dims/activations,
/// row-major weights, output_weights and output_bias. Doubles use shortest round-trip text.
std::string nam_to_json(const NamModel& model);
/// Throws DataError on malformed input, SchemaVersionError on a version mismatch.
NamModel nam_from_json(const std::string& text);

}  // namespace fednam

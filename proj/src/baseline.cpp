#include "fednam/baseline.hpp"

namespace fednam {

BaselineDnn make_baseline_dnn(std::vector<std::string> feature_names, Task task, std::size_t num_classes,
                              const BaselineConfig& config, std::uint64_t seed) {
  if (feature_names.empty()) throw ShapeError("baseline: at least one feature required");
  if (config.hidden_layers == 0 || config.hidden_units == 0) throw ShapeError("baseline: hidden layers/units >= 1");
  std::vector<std::size_t> dims{feature_names.size()};
  for (std::size_t l = 0; l < config.hidden_layers; ++l) dims.push_back(config.hidden_units);
  dims.push_back(task == Task::Binary ? 1 : num_classes);
  BaselineDnn model;
  model.task = task;
  model.feature_names = std::move(feature_names);
  model.mlp = make_mlp(dims, ActivationKind::ReLU, ActivationKind::ReLU, ActivationKind::Identity, config.dropout, seed);
  return model;
}

std::vector<double> logit_input_gradient(const BaselineDnn& model, std::span<const double> x, std::size_t logit_index) {
  if (logit_index >= model.num_outputs()) throw ShapeError("logit_input_gradient: logit index out of range");
  const auto fwd = forward(model.mlp, x, Mode::Infer, 0);
  std::vector<double> seed_grad(model.num_outputs(), 0.0);
  seed_grad[logit_index] = 1.0;
  return backward(model.mlp, fwd.cache, seed_grad).input_grad;
}

}  // namespace fednam

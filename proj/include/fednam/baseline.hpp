#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fednam/nn.hpp"

namespace fednam {

/// Plain DNN over all features jointly; the non-additive comparison model.
struct BaselineDnn {
  Task task = Task::Binary;
  std::vector<std::string> feature_names;
  Mlp mlp;

  std::size_t num_features() const { return mlp.in_dim(); }
  std::size_t num_outputs() const { return mlp.out_dim(); }

  friend bool operator==(const BaselineDnn&, const BaselineDnn&) = default;
};

struct BaselineConfig {
  std::size_t hidden_layers = 2;
  std::size_t hidden_units = 64;
  double dropout = 0.0;
};

BaselineDnn make_baseline_dnn(std::vector<std::string> feature_names, Task task, std::size_t num_classes,
                              const BaselineConfig& config, std::uint64_t seed);

/// d logit_c / d x for one input row (Infer mode).
std::vector<double> logit_input_gradient(const BaselineDnn& model, std::span<const double> x, std::size_t logit_index);

inline std::vector<std::span<double>> parameter_tensors(BaselineDnn& m) { return parameter_tensors(m.mlp); }
inline std::vector<std::span<const double>> parameter_tensors(const BaselineDnn& m) { return parameter_tensors(m.mlp); }
inline bool same_architecture(const BaselineDnn& a, const BaselineDnn& b) {
  return a.task == b.task && same_architecture(a.mlp, b.mlp);
}

}  // namespace fednam

#include "fednam/nam.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "fednam/rng.hpp"

namespace fednam {

using nlohmann::json;

double FeatureNet::evaluate(double x) const {
  const double in[1] = {x};
  ForwardCache cache;
  return forward(mlp, in, Mode::Infer, 0, cache)[0];
}

void NamModel::validate() const {
  const std::size_t k = nets.size();
  const std::size_t c = output_bias.size();
  if (k == 0) throw ShapeError("nam: at least one feature net required");
  if (feature_names.size() != k) throw ShapeError("nam: feature_names length != number of feature nets");
  if (output_weights.rows() != c || output_weights.cols() != k) throw ShapeError("nam: output_weights must be C x K");
  if (task == Task::Binary && c != 1) throw ShapeError("nam: binary task needs exactly one output");
  if (task == Task::Multiclass && c < 2) throw ShapeError("nam: multiclass task needs at least two outputs");
  for (std::size_t i = 0; i < k; ++i) {
    nets[i].mlp.validate();
    if (nets[i].feature_index != i) throw ShapeError("nam: feature nets must be stored in feature order");
    if (nets[i].mlp.in_dim() != 1 || nets[i].mlp.out_dim() != 1) throw ShapeError("nam: feature nets are 1 -> 1");
  }
}

double NamModel::effective_shape(std::size_t k, std::size_t c, double x) const {
  return output_weights(c, k) * nets[k].evaluate(x);
}

NamModel make_nam(std::vector<std::string> feature_names, Task task, std::size_t num_classes, const NamConfig& config,
                  std::uint64_t seed) {
  if (config.hidden_layers == 0 || config.hidden_units == 0) throw ShapeError("nam: hidden layers/units must be >= 1");
  if (config.unit != ActivationKind::ReLU && config.unit != ActivationKind::ExU) {
    throw ShapeError("nam: hidden unit must be relu or exu");
  }
  NamModel model;
  model.task = task;
  const std::size_t k = feature_names.size();
  const std::size_t outputs = task == Task::Binary ? 1 : num_classes;
  model.feature_names = std::move(feature_names);

  std::vector<std::size_t> dims{1};
  for (std::size_t l = 0; l < config.hidden_layers; ++l) dims.push_back(config.hidden_units);
  dims.push_back(1);
  model.nets.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    model.nets.push_back({i, make_mlp(dims, config.unit, ActivationKind::ReLU, ActivationKind::Identity,
                                      config.dropout, derive_seed(seed, {1, i}))});
  }
  auto head = xavier_init(k, outputs, derive_seed(seed, {2}));
  model.output_weights = std::move(head.weights);
  model.output_bias = std::move(head.biases);
  model.validate();
  return model;
}

void nam_forward_into(const NamModel& model, std::span<const double> x, Mode mode, std::uint64_t seed,
                      NamCache& cache, std::vector<double>& logits) {
  const std::size_t k = model.num_features();
  const std::size_t c = model.num_outputs();
  if (x.size() != k) {
    throw ShapeError("nam_forward: input has " + std::to_string(x.size()) + " features, model expects " +
                     std::to_string(k));
  }
  cache.nets.resize(k);
  cache.feature_outputs.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double in[1] = {x[i]};
    cache.feature_outputs[i] = forward(model.nets[i].mlp, in, mode, derive_seed(seed, {i}), cache.nets[i])[0];
  }
  logits.assign(c, 0.0);
  for (std::size_t o = 0; o < c; ++o) {
    double acc = model.output_bias[o];
    const auto w = model.output_weights.row(o);
    for (std::size_t i = 0; i < k; ++i) acc += w[i] * cache.feature_outputs[i];
    logits[o] = acc;
  }
  cache.num_features = k;
  cache.num_outputs = c;
  cache.filled = true;
}

NamForward nam_forward(const NamModel& model, std::span<const double> x, Mode mode, std::uint64_t seed) {
  NamForward out;
  nam_forward_into(model, x, mode, seed, out.cache, out.logits);
  out.terms = Matrix(model.num_outputs(), model.num_features());
  for (std::size_t o = 0; o < model.num_outputs(); ++o) {
    for (std::size_t i = 0; i < model.num_features(); ++i) {
      out.terms(o, i) = model.output_weights(o, i) * out.cache.feature_outputs[i];
    }
  }
  return out;
}

NamGradients NamGradients::zeros_like(const NamModel& model) {
  NamGradients g;
  g.nets.reserve(model.nets.size());
  for (const auto& net : model.nets) g.nets.push_back(MlpGradients::zeros_like(net.mlp));
  g.output_weights = Matrix(model.output_weights.rows(), model.output_weights.cols());
  g.output_bias.assign(model.output_bias.size(), 0.0);
  return g;
}

void NamGradients::set_zero() {
  for (auto& net : nets) net.set_zero();
  std::fill(output_weights.values().begin(), output_weights.values().end(), 0.0);
  std::fill(output_bias.begin(), output_bias.end(), 0.0);
}

void nam_backward_accumulate(const NamModel& model, const NamCache& cache, std::span<const double> logit_grad,
                             NamGradients& grads, std::vector<double>* input_grad) {
  const std::size_t k = model.num_features();
  const std::size_t c = model.num_outputs();
  if (!cache.filled) throw ShapeError("nam_backward: cache was never filled by nam_forward");
  if (cache.num_features != k || cache.num_outputs != c || cache.nets.size() != k) {
    throw ShapeError("nam_backward: cache belongs to a different model");
  }
  if (logit_grad.size() != c) throw ShapeError("nam_backward: logit gradient length != number of outputs");
  if (grads.nets.size() != k) throw ShapeError("nam_backward: gradient buffer mismatch");

  for (std::size_t o = 0; o < c; ++o) {
    grads.output_bias[o] += logit_grad[o];
    for (std::size_t i = 0; i < k; ++i) grads.output_weights(o, i) += logit_grad[o] * cache.feature_outputs[i];
  }
  if (input_grad != nullptr) input_grad->assign(k, 0.0);
  std::vector<double> net_in_grad;
  for (std::size_t i = 0; i < k; ++i) {
    double upstream = 0.0;
    for (std::size_t o = 0; o < c; ++o) upstream += logit_grad[o] * model.output_weights(o, i);
    if (upstream == 0.0 && input_grad == nullptr) continue;
    const double g[1] = {upstream};
    backward_accumulate(model.nets[i].mlp, cache.nets[i], g, grads.nets[i],
                        input_grad != nullptr ? &net_in_grad : nullptr);
    if (input_grad != nullptr) (*input_grad)[i] = net_in_grad[0];
  }
}

NamBackward nam_backward(const NamModel& model, const NamCache& cache, std::span<const double> logit_grad) {
  NamBackward out{NamGradients::zeros_like(model), {}};
  nam_backward_accumulate(model, cache, logit_grad, out.grads, &out.input_grad);
  return out;
}

std::vector<double> logits_to_proba(std::span<const double> logits, Task task) {
  if (task == Task::Binary) return {sigmoid(logits[0])};
  return softmax(logits);
}

std::vector<double> predict_proba(const NamModel& model, std::span<const double> x) {
  NamCache cache;
  std::vector<double> logits;
  nam_forward_into(model, x, Mode::Infer, 0, cache, logits);
  return logits_to_proba(logits, model.task);
}

Decomposition decompose_prediction(const NamModel& model, std::span<const double> x) {
  const auto fwd = nam_forward(model, x, Mode::Infer, 0);
  Decomposition d;
  d.bias = model.output_bias;
  d.logits = fwd.logits;
  for (std::size_t i = 0; i < model.num_features(); ++i) {
    FeatureTerm term{i, model.feature_names[i], {}};
    for (std::size_t o = 0; o < model.num_outputs(); ++o) term.per_class.push_back(fwd.terms(o, i));
    d.terms.push_back(std::move(term));
  }
  auto magnitude = [&](std::size_t i) {
    double m = 0.0;
    for (double v : d.terms[i].per_class) m = std::max(m, std::abs(v));
    return m;
  };
  d.ranking.resize(model.num_features());
  std::iota(d.ranking.begin(), d.ranking.end(), std::size_t{0});
  std::stable_sort(d.ranking.begin(), d.ranking.end(),
                   [&](std::size_t a, std::size_t b) { return magnitude(a) > magnitude(b); });
  return d;
}

std::vector<std::span<double>> parameter_tensors(NamModel& model) {
  std::vector<std::span<double>> out;
  for (auto& net : model.nets) {
    auto t = parameter_tensors(net.mlp);
    out.insert(out.end(), t.begin(), t.end());
  }
  out.emplace_back(model.output_weights.values());
  out.emplace_back(model.output_bias);
  return out;
}

std::vector<std::span<const double>> parameter_tensors(const NamModel& model) {
  std::vector<std::span<const double>> out;
  for (const auto& net : model.nets) {
    auto t = parameter_tensors(net.mlp);
    out.insert(out.end(), t.begin(), t.end());
  }
  out.emplace_back(model.output_weights.values());
  out.emplace_back(model.output_bias);
  return out;
}

std::vector<std::span<double>> parameter_tensors(NamGradients& grads) {
  std::vector<std::span<double>> out;
  for (auto& net : grads.nets) {
    auto t = parameter_tensors(net);
    out.insert(out.end(), t.begin(), t.end());
  }
  out.emplace_back(grads.output_weights.values());
  out.emplace_back(grads.output_bias);
  return out;
}

std::vector<std::span<const double>> parameter_tensors(const NamGradients& grads) {
  std::vector<std::span<const double>> out;
  for (const auto& net : grads.nets) {
    auto t = parameter_tensors(net);
    out.insert(out.end(), t.begin(), t.end());
  }
  out.emplace_back(grads.output_weights.values());
  out.emplace_back(grads.output_bias);
  return out;
}

bool same_architecture(const NamModel& a, const NamModel& b) {
  if (a.task != b.task || a.nets.size() != b.nets.size() || a.output_bias.size() != b.output_bias.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.nets.size(); ++i) {
    if (!same_architecture(a.nets[i].mlp, b.nets[i].mlp)) return false;
  }
  return true;
}

std::string nam_to_json(const NamModel& model) {
  json doc;
  doc["schema_version"] = kModelSchemaVersion;
  doc["task"] = std::string(to_string(model.task));
  doc["feature_names"] = model.feature_names;
  json nets = json::array();
  for (const auto& net : model.nets) {
    json layers = json::array();
    for (std::size_t l = 0; l < net.mlp.layers.size(); ++l) {
      const auto& layer = net.mlp.layers[l];
      const auto w = layer.weights.values();
      layers.push_back({{"in_dim", layer.in_dim()},
                        {"out_dim", layer.out_dim()},
                        {"activation", std::string(to_string(net.mlp.activations[l]))},
                        {"weights", std::vector<double>(w.begin(), w.end())},
                        {"biases", layer.biases}});
    }
    nets.push_back({{"feature_index", net.feature_index}, {"dropout", net.mlp.dropout_rate}, {"layers", layers}});
  }
  doc["nets"] = std::move(nets);
  const auto ow = model.output_weights.values();
  doc["output_weights"] = {{"rows", model.output_weights.rows()},
                           {"cols", model.output_weights.cols()},
                           {"values", std::vector<double>(ow.begin(), ow.end())}};
  doc["output_bias"] = model.output_bias;
  return doc.dump(1) + "\n";
}

NamModel nam_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("model JSON parse error: ") + e.what());
  }
  try {
    const int version = doc.at("schema_version").get<int>();
    if (version != kModelSchemaVersion) throw SchemaVersionError(kModelSchemaVersion, version);
    NamModel model;
    model.task = task_from_string(doc.at("task").get<std::string>());
    model.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    for (const auto& jn : doc.at("nets")) {
      FeatureNet net;
      net.feature_index = jn.at("feature_index").get<std::size_t>();
      net.mlp.dropout_rate = jn.at("dropout").get<double>();
      for (const auto& jl : jn.at("layers")) {
        const auto in_dim = jl.at("in_dim").get<std::size_t>();
        const auto out_dim = jl.at("out_dim").get<std::size_t>();
        LayerParams layer;
        layer.weights = Matrix(out_dim, in_dim, jl.at("weights").get<std::vector<double>>());
        layer.biases = jl.at("biases").get<std::vector<double>>();
        net.mlp.layers.push_back(std::move(layer));
        net.mlp.activations.push_back(activation_from_string(jl.at("activation").get<std::string>()));
      }
      model.nets.push_back(std::move(net));
    }
    const auto& jw = doc.at("output_weights");
    model.output_weights = Matrix(jw.at("rows").get<std::size_t>(), jw.at("cols").get<std::size_t>(),
                                  jw.at("values").get<std::vector<double>>());
    model.output_bias = doc.at("output_bias").get<std::vector<double>>();
    model.validate();
    return model;
  } catch (const SchemaVersionError&) {
    throw;
  } catch (const json::exception& e) {
    throw DataError(std::string("model JSON schema error: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("model JSON content error: ") + e.what());
  }
}

}  // namespace fednam

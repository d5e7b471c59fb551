#include "fednam/kernels.hpp"

#include <atomic>

namespace fednam::kernels {

namespace {
std::atomic<int> g_threads{0};

void check_average_inputs(std::span<const std::vector<std::span<const double>>> clients,
                          std::span<const double> coefs, std::span<const std::span<double>> out) {
  if (clients.empty()) throw ShapeError("weighted_average: no clients");
  if (coefs.size() != clients.size()) throw ShapeError("weighted_average: one coefficient per client");
  for (const auto& c : clients) {
    if (c.size() != out.size()) throw ShapeError("weighted_average: tensor count mismatch");
    for (std::size_t t = 0; t < out.size(); ++t) {
      if (c[t].size() != out[t].size()) throw ShapeError("weighted_average: tensor shape mismatch");
    }
  }
}

inline double average_coordinate(std::span<const std::vector<std::span<const double>>> clients,
                                  std::span<const double> coefs, std::size_t t, std::size_t i) {
  const double base = clients[0][t][i];
  double lo = base;
  double hi = base;
  double delta = 0.0;
  for (std::size_t c = 1; c < clients.size(); ++c) {
    const double v = clients[c][t][i];
    delta += coefs[c] * (v - base);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return std::clamp(base + delta, lo, hi);
}
}  // namespace

void set_threads(int threads) { g_threads = threads < 0 ? 0 : threads; }

int threads() {
  const int t = g_threads.load();
  return t > 0 ? t : omp_get_max_threads();
}

std::vector<double> logits_to_probabilities(const Matrix& logits, Task task) {
  std::vector<double> out;
  out.reserve(logits.size());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto p = logits_to_proba(logits.row(r), task);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

void weighted_average_serial(std::span<const std::vector<std::span<const double>>> clients,
                             std::span<const double> coefs, std::span<const std::span<double>> out) {
  check_average_inputs(clients, coefs, out);
  for (std::size_t t = 0; t < out.size(); ++t) {
    for (std::size_t i = 0; i < out[t].size(); ++i) out[t][i] = average_coordinate(clients, coefs, t, i);
  }
}

void weighted_average(std::span<const std::vector<std::span<const double>>> clients, std::span<const double> coefs,
                      std::span<const std::span<double>> out) {
  check_average_inputs(clients, coefs, out);
  // Flatten (tensor, coordinate) pairs so small tensors (biases) do not starve threads.
  std::vector<std::size_t> offsets(out.size() + 1, 0);
  for (std::size_t t = 0; t < out.size(); ++t) offsets[t + 1] = offsets[t] + out[t].size();
  const auto total = static_cast<std::ptrdiff_t>(offsets.back());
#pragma omp parallel for schedule(static) num_threads(threads()) if (total > 4096)
  for (std::ptrdiff_t flat = 0; flat < total; ++flat) {
    const auto f = static_cast<std::size_t>(flat);
    const auto t = static_cast<std::size_t>(std::upper_bound(offsets.begin(), offsets.end(), f) - offsets.begin() - 1);
    const std::size_t i = f - offsets[t];
    out[t][i] = average_coordinate(clients, coefs, t, i);
  }
}

std::vector<double> feature_net_outputs_serial(const FeatureNet& net, std::span<const double> xs) {
  std::vector<double> out(xs.size());
  ForwardCache cache;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double in[1] = {xs[i]};
    out[i] = forward(net.mlp, in, Mode::Infer, 0, cache)[0];
  }
  return out;
}

std::vector<double> feature_net_outputs(const FeatureNet& net, std::span<const double> xs) {
  std::vector<double> out(xs.size());
  const auto n = static_cast<std::ptrdiff_t>(xs.size());
#pragma omp parallel num_threads(threads()) if (n > 256)
  {
    ForwardCache cache;
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const double in[1] = {xs[static_cast<std::size_t>(i)]};
      out[static_cast<std::size_t>(i)] = forward(net.mlp, in, Mode::Infer, 0, cache)[0];
    }
  }
  return out;
}

}  // namespace fednam::kernels

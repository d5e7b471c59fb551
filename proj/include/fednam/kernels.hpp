#pragma once

// Data-parallel kernels used by training, aggregation and reporting.
//
// Every kernel has a `_serial` twin that walks the data in the plainest possible
// order; the tests hold the parallel versions against them. Parallel reductions
// use a fixed chunking that does not depend on the thread count, so results are
// reproducible bit-for-bit on any machine and with any OMP_NUM_THREADS.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <omp.h>

#include "fednam/baseline.hpp"
#include "fednam/data.hpp"
#include "fednam/nam.hpp"
#include "fednam/rng.hpp"

namespace fednam {

/// Per-model adapters the kernels are written against.
template <class Model>
struct ModelOps;

template <>
struct ModelOps<NamModel> {
  using Gradients = NamGradients;
  struct Workspace {
    NamCache cache;
    std::vector<double> logits;
  };

  static Gradients zeros_like(const NamModel& m) { return NamGradients::zeros_like(m); }
  static Task task(const NamModel& m) { return m.task; }
  static std::size_t num_outputs(const NamModel& m) { return m.num_outputs(); }

  static double loss_grad(const NamModel& m, std::span<const double> x, int y, Mode mode, std::uint64_t seed,
                          Gradients& acc, Workspace& ws) {
    nam_forward_into(m, x, mode, seed, ws.cache, ws.logits);
    const auto lg = loss_and_grad(ws.logits, y, m.task);
    nam_backward_accumulate(m, ws.cache, lg.grad, acc);
    return lg.loss;
  }

  static const std::vector<double>& logits(const NamModel& m, std::span<const double> x, Workspace& ws) {
    nam_forward_into(m, x, Mode::Infer, 0, ws.cache, ws.logits);
    return ws.logits;
  }
};

template <>
struct ModelOps<BaselineDnn> {
  using Gradients = MlpGradients;
  struct Workspace {
    ForwardCache cache;
  };

  static Gradients zeros_like(const BaselineDnn& m) { return MlpGradients::zeros_like(m.mlp); }
  static Task task(const BaselineDnn& m) { return m.task; }
  static std::size_t num_outputs(const BaselineDnn& m) { return m.num_outputs(); }

  static double loss_grad(const BaselineDnn& m, std::span<const double> x, int y, Mode mode, std::uint64_t seed,
                          Gradients& acc, Workspace& ws) {
    const auto& out = forward(m.mlp, x, mode, seed, ws.cache);
    const auto lg = loss_and_grad(out, y, m.task);
    backward_accumulate(m.mlp, ws.cache, lg.grad, acc);
    return lg.loss;
  }

  static const std::vector<double>& logits(const BaselineDnn& m, std::span<const double> x, Workspace& ws) {
    return forward(m.mlp, x, Mode::Infer, 0, ws.cache);
  }
};

template <class Model>
using GradientsOf = typename ModelOps<Model>::Gradients;

namespace kernels {

/// Samples per reduction chunk. Fixed so that the summation tree is thread-count independent.
inline constexpr std::size_t kChunk = 16;

/// Thread budget for the parallel kernels (0 = OpenMP default).
void set_threads(int threads);
int threads();

/// Per-sample dropout seed: a function of the batch seed and the dataset row only.
inline std::uint64_t sample_seed(std::uint64_t batch_seed, std::size_t row) { return derive_seed(batch_seed, {row}); }

template <class Model>
void scale_gradients(GradientsOf<Model>& g, double factor) {
  for (auto t : parameter_tensors(g)) {
    for (double& v : t) v *= factor;
  }
}

template <class Model>
void add_gradients(GradientsOf<Model>& acc, const GradientsOf<Model>& g) {
  auto dst = parameter_tensors(acc);
  auto src = parameter_tensors(g);
  for (std::size_t t = 0; t < dst.size(); ++t) {
    for (std::size_t i = 0; i < dst[t].size(); ++i) dst[t][i] += src[t][i];
  }
}

/// Scratch buffers reused across batches.
template <class Model>
struct BatchWorkspace {
  std::vector<GradientsOf<Model>> chunk_grads;
  std::vector<typename ModelOps<Model>::Workspace> chunk_ws;
  std::vector<double> chunk_loss;
};

/// Mean loss over `rows` and the mean gradient written into `out` (overwritten).
template <class Model>
double batch_loss_grad_serial(const Model& model, const Dataset& data, std::span<const std::size_t> rows, Mode mode,
                              std::uint64_t seed, GradientsOf<Model>& out) {
  out = ModelOps<Model>::zeros_like(model);
  typename ModelOps<Model>::Workspace ws;
  double loss = 0.0;
  for (std::size_t row : rows) {
    loss += ModelOps<Model>::loss_grad(model, data.X.row(row), data.y[row], mode, sample_seed(seed, row), out, ws);
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  scale_gradients<Model>(out, inv);
  return loss * inv;
}

template <class Model>
double batch_loss_grad(const Model& model, const Dataset& data, std::span<const std::size_t> rows, Mode mode,
                       std::uint64_t seed, GradientsOf<Model>& out, BatchWorkspace<Model>& ws) {
  const std::size_t n = rows.size();
  const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
  if (ws.chunk_grads.size() < n_chunks || ws.chunk_ws.size() < n_chunks) {
    ws.chunk_grads.resize(n_chunks, ModelOps<Model>::zeros_like(model));
    ws.chunk_ws.resize(n_chunks);
  }
  ws.chunk_loss.assign(n_chunks, 0.0);

#pragma omp parallel for schedule(static) num_threads(threads()) if (n_chunks > 1)
  for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(n_chunks); ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    auto& g = ws.chunk_grads[c];
    for (auto t : parameter_tensors(g)) std::fill(t.begin(), t.end(), 0.0);
    double loss = 0.0;
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      const std::size_t row = rows[i];
      loss += ModelOps<Model>::loss_grad(model, data.X.row(row), data.y[row], mode, sample_seed(seed, row), g,
                                         ws.chunk_ws[c]);
    }
    ws.chunk_loss[c] = loss;
  }

  out = ws.chunk_grads[0];
  double loss = ws.chunk_loss[0];
  for (std::size_t c = 1; c < n_chunks; ++c) {
    add_gradients<Model>(out, ws.chunk_grads[c]);
    loss += ws.chunk_loss[c];
  }
  const double inv = 1.0 / static_cast<double>(n);
  scale_gradients<Model>(out, inv);
  return loss * inv;
}

/// Inference-mode logits for every row of X (rows x num_outputs).
template <class Model>
Matrix predict_logits_serial(const Model& model, const Matrix& X) {
  Matrix out(X.rows(), ModelOps<Model>::num_outputs(model));
  typename ModelOps<Model>::Workspace ws;
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const auto& z = ModelOps<Model>::logits(model, X.row(r), ws);
    std::copy(z.begin(), z.end(), out.row(r).begin());
  }
  return out;
}

template <class Model>
Matrix predict_logits(const Model& model, const Matrix& X) {
  Matrix out(X.rows(), ModelOps<Model>::num_outputs(model));
  const auto n = static_cast<std::ptrdiff_t>(X.rows());
#pragma omp parallel num_threads(threads()) if (n > static_cast<std::ptrdiff_t>(kChunk))
  {
    typename ModelOps<Model>::Workspace ws;
#pragma omp for schedule(static)
    for (std::ptrdiff_t r = 0; r < n; ++r) {
      const auto& z = ModelOps<Model>::logits(model, X.row(static_cast<std::size_t>(r)), ws);
      std::copy(z.begin(), z.end(), out.row(static_cast<std::size_t>(r)).begin());
    }
  }
  return out;
}

/// Probabilities laid out as compute_metrics expects (one per row for Binary, C per row otherwise).
std::vector<double> logits_to_probabilities(const Matrix& logits, Task task);

/// Sample-weighted parameter average: out = sum_i coef_i * tensor_i, computed as
/// t_0 + sum_i coef_i (t_i - t_0) and clamped into [min_i t_i, max_i t_i] per coordinate.
/// Identical inputs therefore reproduce the input bit-for-bit.
void weighted_average_serial(std::span<const std::vector<std::span<const double>>> clients,
                             std::span<const double> coefs, std::span<const std::span<double>> out);
void weighted_average(std::span<const std::vector<std::span<const double>>> clients, std::span<const double> coefs,
                      std::span<const std::span<double>> out);

/// f_k evaluated at each value (Infer mode).
std::vector<double> feature_net_outputs_serial(const FeatureNet& net, std::span<const double> xs);
std::vector<double> feature_net_outputs(const FeatureNet& net, std::span<const double> xs);

}  // namespace kernels
}  // namespace fednam

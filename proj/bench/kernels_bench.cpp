// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <numeric>

#include "fednam/interpret.hpp"
#include "fednam/kernels.hpp"
#include "fednam/shape.hpp"

using namespace fednam;

namespace {

Dataset random_dataset(std::size_t n, std::size_t k) {
  Rng rng(1);
  Dataset d;
  d.X = Matrix(n, k);
  d.y.resize(n);
  d.task = Task::Binary;
  d.num_classes = 2;
  d.class_names = {"0", "1"};
  for (std::size_t c = 0; c < k; ++c) d.feature_names.push_back("x" + std::to_string(c));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < k; ++c) d.X(r, c) = rng.uniform(-2.0, 2.0);
    d.y[r] = d.X(r, 0) > 0.0;
  }
  return d;
}

const Dataset& data() {
  static const Dataset d = random_dataset(1024, 11);
  return d;
}

const NamModel& model() {
  static const NamModel m = make_nam(data().feature_names, Task::Binary, 2, {3, 20, ActivationKind::ReLU, 0.1}, 3);
  return m;
}

std::vector<std::size_t> rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  std::iota(r.begin(), r.end(), std::size_t{0});
  return r;
}

void BM_BatchGradSerial(benchmark::State& state) {
  const auto r = rows(static_cast<std::size_t>(state.range(0)));
  NamGradients g;
  for (auto _ : state) benchmark::DoNotOptimize(kernels::batch_loss_grad_serial(model(), data(), r, Mode::Train, 1, g));
}

void BM_BatchGradParallel(benchmark::State& state) {
  const auto r = rows(static_cast<std::size_t>(state.range(0)));
  NamGradients g;
  kernels::BatchWorkspace<NamModel> ws;
  for (auto _ : state) benchmark::DoNotOptimize(kernels::batch_loss_grad(model(), data(), r, Mode::Train, 1, g, ws));
}

void BM_PredictSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(kernels::predict_logits_serial(model(), data().X));
}

void BM_PredictParallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(kernels::predict_logits(model(), data().X));
}

void BM_ContributionsSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(contribution_scores_serial(model(), data().X, "global"));
}

void BM_ContributionsParallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(contribution_scores(model(), data().X, "global"));
}

void BM_WeightedAverage(benchmark::State& state, bool parallel) {
  std::vector<NamModel> clients;
  for (std::uint64_t s = 0; s < 5; ++s) clients.push_back(make_nam(data().feature_names, Task::Binary, 2, {}, s));
  std::vector<std::vector<std::span<const double>>> views;
  for (const auto& c : clients) views.push_back(parameter_tensors(c));
  NamModel out = clients[0];
  const auto out_views = parameter_tensors(out);
  const std::vector<double> coefs(5, 0.2);
  for (auto _ : state) {
    if (parallel) kernels::weighted_average(views, coefs, out_views);
    else kernels::weighted_average_serial(views, coefs, out_views);
    benchmark::ClobberMemory();
  }
}

}  // namespace

BENCHMARK(BM_BatchGradSerial)->Arg(32)->Arg(1024);
BENCHMARK(BM_BatchGradParallel)->Arg(32)->Arg(1024);
BENCHMARK(BM_PredictSerial);
BENCHMARK(BM_PredictParallel);
BENCHMARK(BM_ContributionsSerial);
BENCHMARK(BM_ContributionsParallel);
BENCHMARK_CAPTURE(BM_WeightedAverage, serial, false);
BENCHMARK_CAPTURE(BM_WeightedAverage, parallel, true);

BENCHMARK_MAIN();

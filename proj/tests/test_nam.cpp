#include <doctest.h>

#include <cmath>

#include "fednam/errors.hpp"
#include "fednam/nam.hpp"
#include "oracles.hpp"

using namespace fednam;

namespace {

FeatureNet identity_net(std::size_t k, double slope) {
  FeatureNet net;
  net.feature_index = k;
  net.mlp.layers.emplace_back(1, 1);
  net.mlp.layers[0].weights(0, 0) = slope;
  net.mlp.activations = {ActivationKind::Identity};
  return net;
}

NamModel identity_model() {
  NamModel m;
  m.task = Task::Binary;
  m.feature_names = {"a", "b"};
  m.nets = {identity_net(0, 1.0), identity_net(1, 2.0)};
  m.output_weights = Matrix(1, 2, std::vector<double>{1.0, 1.0});
  m.output_bias = {0.0};
  m.validate();
  return m;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace

TEST_CASE("zero shape functions leave only the bias") {
  auto m = make_nam(oracle::names(3), Task::Binary, 2, {}, 1);
  for (auto& net : m.nets) {
    for (auto t : parameter_tensors(net.mlp)) std::fill(t.begin(), t.end(), 0.0);
  }
  m.output_bias = {0.5};
  const std::vector<double> x{1.0, -2.0, 3.0};
  const auto fwd = nam_forward(m, x);
  CHECK(fwd.logits[0] == 0.5);
  CHECK(predict_proba(m, x)[0] == doctest::Approx(0.6224593).epsilon(1e-7));
  const auto d = decompose_prediction(m, x);
  for (const auto& t : d.terms) CHECK(t.per_class[0] == 0.0);
}

TEST_CASE("identity nets compose linearly") {
  const auto m = identity_model();
  const std::vector<double> x{3.0, 4.0};
  const auto fwd = nam_forward(m, x);
  CHECK(fwd.logits[0] == 11.0);
  CHECK(fwd.terms(0, 0) == 3.0);
  CHECK(fwd.terms(0, 1) == 8.0);
  const auto d = decompose_prediction(m, x);
  CHECK(d.ranking.front() == 1);
  const std::vector<double> bad{1.0};
  CHECK_THROWS_AS(nam_forward(m, bad), ShapeError);
}

TEST_CASE("predict_proba closed forms") {
  auto m = make_nam(oracle::names(2), Task::Binary, 2, {}, 4);
  m.output_weights = Matrix(1, 2, 0.0);
  m.output_bias = {0.0};
  const std::vector<double> x{0.3, 0.1};
  CHECK(predict_proba(m, x)[0] == 0.5);
  auto mc = make_nam(oracle::names(2), Task::Multiclass, 3, {}, 4);
  mc.output_weights = Matrix(3, 2, 0.0);
  mc.output_bias = {0.0, 0.0, 0.0};
  for (double p : predict_proba(mc, x)) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("additivity, univariance and locality on random models") {
  Rng rng(8);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const bool multi = s % 2 == 1;
    NamConfig cfg;
    cfg.unit = s % 3 == 0 ? ActivationKind::ExU : ActivationKind::ReLU;
    const auto m = oracle::random_nam(5, multi ? Task::Multiclass : Task::Binary, 3, s, cfg);
    for (int t = 0; t < 100; ++t) {
      auto x = oracle::random_vector(rng, 5);
      const auto d = decompose_prediction(m, x);
      for (std::size_t c = 0; c < m.num_outputs(); ++c) {
        double sum = d.bias[c];
        for (const auto& term : d.terms) sum += term.per_class[c];
        CHECK(rel_err(sum, d.logits[c]) <= 1e-9);
      }
      const std::size_t j = static_cast<std::size_t>(t) % 5;
      auto y = x;
      y[j] += rng.uniform(-1.0, 1.0);
      const auto a = nam_forward(m, x);
      const auto b = nam_forward(m, y);
      for (std::size_t k = 0; k < 5; ++k) {
        if (k == j) continue;
        CHECK(a.cache.feature_outputs[k] == b.cache.feature_outputs[k]);
        for (std::size_t c = 0; c < m.num_outputs(); ++c) CHECK(a.terms(c, k) == b.terms(c, k));
      }
    }
  }
}

TEST_CASE("nam gradients match finite differences and stay isolated") {
  Rng rng(21);
  for (std::uint64_t s = 0; s < 6; ++s) {
    const Task task = s % 2 ? Task::Multiclass : Task::Binary;
    NamConfig cfg;
    cfg.hidden_layers = 1 + s % 3;
    cfg.hidden_units = 4 + s;
    cfg.unit = s % 3 == 2 ? ActivationKind::ExU : ActivationKind::ReLU;
    cfg.dropout = 0.1;
    auto m = oracle::random_nam(3, task, 3, s, cfg);
    const auto x = oracle::random_vector(rng, 3);
    const int y = static_cast<int>(s % (task == Task::Binary ? 2 : 3));
    const std::uint64_t mask = 99 + s;

    const auto fwd = nam_forward(m, x, Mode::Train, mask);
    const auto lg = loss_and_grad(fwd.logits, y, task);
    const auto back = nam_backward(m, fwd.cache, lg.grad);
    const auto analytic = oracle::flatten(parameter_tensors(back.grads));
    const auto numeric = oracle::central_differences(parameter_tensors(m),
                                                     [&] { return oracle::nam_loss(m, x, y, Mode::Train, mask); });
    REQUIRE(analytic.size() == numeric.size());
    for (std::size_t i = 0; i < analytic.size(); ++i) CHECK(oracle::grad_close(analytic[i], numeric[i]));

    // Zero upstream gradient yields zero everywhere.
    const std::vector<double> zeros(m.num_outputs(), 0.0);
    auto zero_back = nam_backward(m, fwd.cache, zeros);
    for (auto t : parameter_tensors(zero_back.grads)) {
      for (double g : t) CHECK(g == 0.0);
    }
  }
}

TEST_CASE("input gradient of feature j depends only on net j and its head column") {
  auto m = oracle::random_nam(3, Task::Binary, 2, 12);
  const std::vector<double> x{0.4, -0.2, 1.1};
  const std::vector<double> up{1.0};
  const auto before = nam_backward(m, nam_forward(m, x).cache, up).input_grad;
  for (auto t : parameter_tensors(m.nets[2].mlp)) {
    for (double& v : t) v *= 1.5;
  }
  m.output_weights(0, 2) *= -3.0;
  const auto after = nam_backward(m, nam_forward(m, x).cache, up).input_grad;
  CHECK(after[0] == before[0]);
  CHECK(after[1] == before[1]);
  CHECK(after[2] != before[2]);
}

TEST_CASE("stale caches are rejected") {
  const auto m = oracle::random_nam(3, Task::Binary, 2, 1);
  const std::vector<double> up{1.0};
  NamCache empty;
  CHECK_THROWS_AS(nam_backward(m, empty, up), ShapeError);
  const auto other = oracle::random_nam(4, Task::Binary, 2, 1);
  const std::vector<double> x4{0.0, 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(nam_backward(m, nam_forward(other, x4).cache, up), ShapeError);
}

TEST_CASE("model json round-trips bit-exactly") {
  NamConfig cfg;
  cfg.unit = ActivationKind::ExU;
  cfg.dropout = 0.1;
  const auto m = oracle::random_nam(4, Task::Multiclass, 3, 77, cfg);
  const std::string text = nam_to_json(m);
  const NamModel back = nam_from_json(text);
  CHECK(back == m);
  CHECK(nam_to_json(back) == text);

  std::string bumped = text;
  const auto pos = bumped.find("\"schema_version\": 1");
  REQUIRE(pos != std::string::npos);
  bumped.replace(pos, 19, "\"schema_version\": 2");
  try {
    nam_from_json(bumped);
    FAIL("expected a schema version error");
  } catch (const SchemaVersionError& e) {
    CHECK(e.expected() == 1);
    CHECK(e.found() == 2);
  }
  CHECK_THROWS_AS(nam_from_json(text.substr(0, text.size() / 2)), DataError);
  CHECK_THROWS_AS(nam_from_json("{\"schema_version\": 1}"), DataError);
}

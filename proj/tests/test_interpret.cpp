#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include "fednam/errors.hpp"
#include "fednam/interpret.hpp"
#include "oracles.hpp"

using namespace fednam;

namespace {

FeatureNet linear_net(std::size_t k, double slope) {
  FeatureNet net;
  net.feature_index = k;
  net.mlp.layers.emplace_back(1, 1);
  net.mlp.layers[0].weights(0, 0) = slope;
  net.mlp.activations = {ActivationKind::Identity};
  return net;
}

NamModel linear_nam(std::vector<double> slopes) {
  NamModel m;
  for (std::size_t k = 0; k < slopes.size(); ++k) m.nets.push_back(linear_net(k, slopes[k]));
  m.feature_names = oracle::names(slopes.size());
  m.output_weights = Matrix(1, slopes.size(), 1.0);
  m.output_bias = {0.0};
  return m;
}

BaselineDnn linear_baseline(std::vector<double> w) {
  BaselineDnn b;
  b.feature_names = oracle::names(w.size());
  b.mlp.layers.emplace_back(w.size(), 1);
  for (std::size_t k = 0; k < w.size(); ++k) b.mlp.layers[0].weights(0, k) = w[k];
  b.mlp.activations = {ActivationKind::Identity};
  return b;
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix X(rows, cols);
  for (double& v : X.values()) v = rng.uniform(-2.0, 2.0);
  return X;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("fednam_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("zero-weight net gives a flat zero curve") {
  const auto m = linear_nam({0.0, 1.0});
  const auto c = sample_shape_curve(m, 0, 0, linspace(-3, 3, 101), "global");
  for (double v : c.values) CHECK(v == 0.0);
  CHECK(c.offset == 0.0);
}

TEST_CASE("identity shape on a symmetric grid is already centered") {
  const auto m = linear_nam({1.0});
  const auto grid = linspace(-1, 1, kGridPoints);
  const auto c = sample_shape_curve(m, 0, 0, grid, "global");
  for (std::size_t i = 0; i < grid.size(); ++i) CHECK(std::abs(c.values[i] - grid[i]) <= 1e-15);
}

TEST_CASE("centered curves have zero mean and reproduce the model") {
  Rng rng(2);
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto m = oracle::random_nam(3, s % 2 ? Task::Multiclass : Task::Binary, 3, s);
    const std::size_t k = s % 3;
    const std::size_t c = s % m.num_outputs();
    const auto grid = linspace(-rng.uniform(0.5, 3), rng.uniform(0.5, 3), kGridPoints);
    const auto curve = sample_shape_curve(m, k, c, grid, "client1");
    const double mean = std::accumulate(curve.values.begin(), curve.values.end(), 0.0) / kGridPoints;
    CHECK(std::abs(mean) <= 1e-9);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      CHECK(std::abs(m.effective_shape(k, c, grid[i]) - (curve.values[i] + curve.offset)) <= 1e-9);
    }
    for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i] > grid[i - 1]);
  }
}

TEST_CASE("degenerate feature range yields a one-point grid") {
  std::vector<std::string> seen;
  set_warning_sink([&](const std::string& m) { seen.push_back(m); });
  const Matrix X(3, 2, std::vector<double>{1, 4, 2, 4, 3, 4});
  const auto g = FeatureGrid::from_data(X);
  set_warning_sink(nullptr);
  CHECK(g.points[0].size() == kGridPoints);
  CHECK(g.points[1].size() == 1);
  CHECK(seen.size() == 1);
}

TEST_CASE("contribution score examples") {
  const Matrix X(2, 2, std::vector<double>{-2, 5, 2, -5});
  const auto r = contribution_scores(linear_nam({1.0, 0.0}), X, "client1");
  CHECK(r.scores[0].score == 2.0);
  CHECK(r.scores[1].score == 0.0);
  CHECK(r.ranking == std::vector<std::size_t>{0, 1});
  CHECK(r.top(1) == std::vector<std::string>{"x0"});

  const auto zero = contribution_scores(linear_nam({0.0, 0.0}), X, "z");
  for (const auto& s : zero.scores) CHECK(s.score == 0.0);
  CHECK(zero.ranking == std::vector<std::size_t>{0, 1});

  const Matrix empty(0, 2);
  CHECK_THROWS_AS(contribution_scores(linear_nam({1.0, 1.0}), empty, "e"), DataError);
}

TEST_CASE("scaling a head weight scales its score and never lowers its rank") {
  Rng rng(5);
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto m = oracle::random_nam(5, s % 2 ? Task::Multiclass : Task::Binary, 3, s);
    const Matrix X = random_matrix(rng, 60, 5);
    const auto base = contribution_scores(m, X, "a");
    for (const auto& sc : base.scores) CHECK(sc.score >= 0.0);
    const std::size_t k = s % 5;
    auto scaled_model = m;
    const double lambda = s % 3 == 0 ? 10.0 : 1.0 + rng.uniform(0.01, 4.0);
    for (std::size_t c = 0; c < m.num_outputs(); ++c) scaled_model.output_weights(c, k) *= lambda;
    const auto scaled = contribution_scores(scaled_model, X, "a");
    CHECK(scaled.scores[k].score == doctest::Approx(lambda * base.scores[k].score).epsilon(1e-12));
    CHECK(scaled.scores[k].rank <= base.scores[k].rank);
    const auto serial = contribution_scores_serial(m, X, "a");
    for (std::size_t j = 0; j < 5; ++j) CHECK(serial.scores[j].score == base.scores[j].score);
    CHECK(serial.ranking == base.ranking);
  }
}

TEST_CASE("identical clients give a global report equal to each client's") {
  Rng rng(6);
  const auto m = oracle::random_nam(4, Task::Binary, 2, 3);
  const Matrix X = random_matrix(rng, 50, 4);
  const NamModel* models[] = {&m, &m, &m};
  const Matrix* rows[] = {&X, &X, &X};
  const auto report = global_interpret(models, rows, m, X);
  REQUIRE(report.contributions.size() == 4);
  CHECK(report.contributions.back().owner == "global");
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(report.contributions[i].owner == client_owner_name(i));
    CHECK(report.contributions[i].ranking == report.contributions.back().ranking);
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(report.contributions[i].scores[k].score == report.contributions.back().scores[k].score);
    }
  }
  CHECK(report.curves.size() == 4 * 4);
}

TEST_CASE("aggregation mode selects how global curves are built") {
  Rng rng(7);
  const auto a = oracle::random_nam(2, Task::Binary, 2, 1);
  const auto b = oracle::random_nam(2, Task::Binary, 2, 2);
  const Matrix X = random_matrix(rng, 20, 2);
  const NamModel* models[] = {&a, &b};
  const Matrix* rows[] = {&X, &X};
  auto count = [](const InterpretReport& r, const std::string& owner) {
    return std::count_if(r.curves.begin(), r.curves.end(), [&](const ShapeCurve& c) { return c.owner == owner; });
  };
  const auto both = global_interpret(models, rows, a, X, Aggregation::Both);
  CHECK(count(both, "global") == 2);
  CHECK(count(both, "global_fedavg") == 2);
  const auto weights = global_interpret(models, rows, a, X, Aggregation::WeightAverage);
  CHECK(count(weights, "global") == 2);
  CHECK(count(weights, "global_fedavg") == 0);
  const auto& g = *std::find_if(weights.curves.begin(), weights.curves.end(),
                                [](const ShapeCurve& c) { return c.owner == "global"; });
  CHECK(g.values == sample_shape_curve(a, 0, 0, weights.grid.points[0], "global").values);
}

TEST_CASE("input-times-gradient on a linear baseline has a closed form") {
  Rng rng(8);
  const std::vector<double> w{0.5, -2.0, 1.5};
  const Matrix X = random_matrix(rng, 40, 3);
  const auto rep = input_x_gradient(linear_baseline(w), X);
  for (std::size_t k = 0; k < 3; ++k) {
    double mean = 0.0;
    for (std::size_t r = 0; r < X.rows(); ++r) mean += X(r, k);
    mean /= static_cast<double>(X.rows());
    CHECK(rep.attribution[k] == doctest::Approx(w[k] * mean).epsilon(1e-12));
  }
  const auto zero = input_x_gradient(linear_baseline({0.0, 0.0, 0.0}), X);
  for (double a : zero.attribution) CHECK(a == 0.0);
}

TEST_CASE("baseline input gradients match finite differences") {
  Rng rng(9);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Task task = s % 2 ? Task::Multiclass : Task::Binary;
    const auto b = make_baseline_dnn(oracle::names(4), task, 3, {2, 16, 0.0}, s);
    auto x = oracle::random_vector(rng, 4);
    const std::size_t logit = task == Task::Binary ? 0 : s % 3;
    const auto g = logit_input_gradient(b, x, logit);
    for (std::size_t k = 0; k < 4; ++k) {
      const double saved = x[k];
      x[k] = saved + 1e-5;
      const double up = predict(b.mlp, x)[logit];
      x[k] = saved - 1e-5;
      const double down = predict(b.mlp, x)[logit];
      x[k] = saved;
      CHECK(oracle::grad_close(g[k], (up - down) / 2e-5));
    }
  }
}

TEST_CASE("csv exports have exact headers and round-trip") {
  const auto dir = temp_dir("exports");
  const auto m = oracle::random_nam(3, Task::Multiclass, 3, 4);
  Rng rng(10);
  const Matrix X = random_matrix(rng, 30, 3);
  const NamModel* models[] = {&m};
  const Matrix* rows[] = {&X};
  const auto report = global_interpret(models, rows, m, X);
  const Scaler scaler = Scaler::fit(X);
  const MetricRows metrics{{"accuracy", 0.5}, {"auc", 0.25}};
  AttributionReport attr{m.feature_names, {0.1, -0.2, 0.3}};
  export_reports(report, m.feature_names, scaler, dir, &attr, &metrics);

  auto first_line = [&](const char* f) {
    std::ifstream in(dir / f);
    std::string line;
    std::getline(in, line);
    return line;
  };
  CHECK(first_line("contributions.csv") == "owner,feature,score,rank");
  CHECK(first_line("shapes.csv") == "owner,feature,class,x,value");
  CHECK(first_line("attributions.csv") == "feature,avg_attribution");
  CHECK(first_line("metrics.csv") == "metric,value");
  CHECK(first_line("grid.csv") == "feature,index,x,x_raw");
  CHECK(std::filesystem::exists(dir / "shapes.svg"));

  const auto back = read_shapes_csv(dir / "shapes.csv", m.feature_names);
  REQUIRE(back.size() == report.curves.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].owner == report.curves[i].owner);
    CHECK(back[i].values == report.curves[i].values);
    CHECK(back[i].grid == report.curves[i].grid);
  }

  CHECK_THROWS_AS(write_metrics_csv("/proc/definitely/not/here.csv", metrics), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("format_double is shortest round-trip") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.0, 0.0}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(std::nan("")) == "nan");
}

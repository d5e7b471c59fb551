#include "fednam/interpret.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "fednam/federation.hpp"
#include "fednam/kernels.hpp"

namespace fednam {

namespace {

std::vector<double> column(const Matrix& X, std::size_t c) {
  std::vector<double> out(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) out[r] = X(r, c);
  return out;
}

// mean_rows |f - mean f| for one feature net's outputs.
double mean_abs_deviation(std::span<const double> f) {
  double sum = 0.0;
  for (double v : f) sum += v;
  const double mean = sum / static_cast<double>(f.size());
  double dev = 0.0;
  for (double v : f) dev += std::abs(v - mean);
  return dev / static_cast<double>(f.size());
}

double class_averaged_score(const NamModel& model, std::size_t k, double deviation) {
  double s = 0.0;
  for (std::size_t c = 0; c < model.num_outputs(); ++c) s += std::abs(model.output_weights(c, k)) * deviation;
  return s / static_cast<double>(model.num_outputs());
}

void finalize_ranking(ContributionReport& report) {
  report.ranking.resize(report.scores.size());
  std::iota(report.ranking.begin(), report.ranking.end(), std::size_t{0});
  std::stable_sort(report.ranking.begin(), report.ranking.end(), [&](std::size_t a, std::size_t b) {
    return report.scores[a].score > report.scores[b].score;
  });
  for (std::size_t r = 0; r < report.ranking.size(); ++r) report.scores[report.ranking[r]].rank = r + 1;
}

void check_rows(const NamModel& model, const Matrix& X) {
  if (X.rows() == 0) throw DataError("contribution_scores: no data rows");
  if (X.cols() != model.num_features()) throw ShapeError("contribution_scores: feature count mismatch");
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

}  // namespace

const FeatureScore& ContributionReport::by_name(const std::string& name) const {
  for (const auto& s : scores) {
    if (s.name == name) return s;
  }
  throw std::out_of_range("no feature named '" + name + "' in report");
}

std::vector<std::string> ContributionReport::top(std::size_t n) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(n, ranking.size()); ++i) out.push_back(scores[ranking[i]].name);
  return out;
}

ContributionReport contribution_scores(const NamModel& model, const Matrix& X, std::string owner) {
  check_rows(model, X);
  ContributionReport report;
  report.owner = std::move(owner);
  report.scores.resize(model.num_features());
  const auto k_count = static_cast<std::ptrdiff_t>(model.num_features());
#pragma omp parallel for schedule(dynamic) num_threads(kernels::threads())
  for (std::ptrdiff_t ki = 0; ki < k_count; ++ki) {
    const auto k = static_cast<std::size_t>(ki);
    const auto f = kernels::feature_net_outputs_serial(model.nets[k], column(X, k));
    report.scores[k] = {k, model.feature_names[k], class_averaged_score(model, k, mean_abs_deviation(f)), 0};
  }
  finalize_ranking(report);
  return report;
}

ContributionReport contribution_scores_serial(const NamModel& model, const Matrix& X, std::string owner) {
  check_rows(model, X);
  ContributionReport report;
  report.owner = std::move(owner);
  for (std::size_t k = 0; k < model.num_features(); ++k) {
    std::vector<double> f(X.rows());
    for (std::size_t r = 0; r < X.rows(); ++r) f[r] = model.nets[k].evaluate(X(r, k));
    report.scores.push_back({k, model.feature_names[k], class_averaged_score(model, k, mean_abs_deviation(f)), 0});
  }
  finalize_ranking(report);
  return report;
}

std::string client_owner_name(std::size_t client_id) { return "client" + std::to_string(client_id + 1); }

InterpretReport global_interpret(std::span<const NamModel* const> client_models,
                                 std::span<const Matrix* const> client_rows, const NamModel& global_model,
                                 const Matrix& full_train, Aggregation aggregation) {
  if (client_models.size() != client_rows.size()) throw ShapeError("global_interpret: one data block per client");
  InterpretReport report;
  report.grid = FeatureGrid::from_data(full_train, global_model.feature_names);
  for (std::size_t i = 0; i < client_models.size(); ++i) {
    report.contributions.push_back(contribution_scores(*client_models[i], *client_rows[i], client_owner_name(i)));
    for (std::size_t k = 0; k < client_models[i]->num_features(); ++k) {
      for (std::size_t c = 0; c < client_models[i]->num_outputs(); ++c) {
        report.curves.push_back(
            sample_shape_curve(*client_models[i], k, c, report.grid.points[k], client_owner_name(i)));
      }
    }
  }
  report.contributions.push_back(contribution_scores(global_model, full_train, "global"));
  auto sample_global = [&](const std::string& owner) {
    for (std::size_t k = 0; k < global_model.num_features(); ++k) {
      for (std::size_t c = 0; c < global_model.num_outputs(); ++c) {
        report.curves.push_back(sample_shape_curve(global_model, k, c, report.grid.points[k], owner));
      }
    }
  };
  if (aggregation == Aggregation::WeightAverage) {
    sample_global("global");
    return report;
  }
  auto averaged = average_shape_functions(client_models, report.grid, "global");
  report.curves.insert(report.curves.end(), std::make_move_iterator(averaged.begin()),
                       std::make_move_iterator(averaged.end()));
  if (aggregation == Aggregation::Both) sample_global("global_fedavg");
  return report;
}

AttributionReport input_x_gradient(const BaselineDnn& model, const Matrix& X) {
  if (X.rows() == 0) throw DataError("input_x_gradient: no rows");
  if (X.cols() != model.num_features()) throw ShapeError("input_x_gradient: feature count mismatch");
  const std::size_t k = model.num_features();
  std::vector<std::vector<double>> per_row(X.rows());
  const auto n = static_cast<std::ptrdiff_t>(X.rows());
#pragma omp parallel for schedule(static) num_threads(kernels::threads())
  for (std::ptrdiff_t ri = 0; ri < n; ++ri) {
    const auto r = static_cast<std::size_t>(ri);
    const auto x = X.row(r);
    const auto fwd = forward(model.mlp, x, Mode::Infer, 0);
    std::size_t target = 0;
    if (model.task == Task::Multiclass) {
      target = static_cast<std::size_t>(std::max_element(fwd.output.begin(), fwd.output.end()) - fwd.output.begin());
    }
    std::vector<double> seed_grad(model.num_outputs(), 0.0);
    seed_grad[target] = 1.0;
    const auto g = backward(model.mlp, fwd.cache, seed_grad).input_grad;
    per_row[r].resize(k);
    for (std::size_t j = 0; j < k; ++j) per_row[r][j] = g[j] * x[j];
  }
  AttributionReport report;
  report.feature_names = model.feature_names;
  report.attribution.assign(k, 0.0);
  for (const auto& row : per_row) {
    for (std::size_t j = 0; j < k; ++j) report.attribution[j] += row[j];
  }
  for (double& a : report.attribution) a /= static_cast<double>(X.rows());
  return report;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

void write_contributions_csv(const std::filesystem::path& path, std::span<const ContributionReport> reports) {
  auto out = open_for_write(path);
  out << "owner,feature,score,rank\n";
  for (const auto& report : reports) {
    for (std::size_t r = 0; r < report.ranking.size(); ++r) {
      const auto& s = report.scores[report.ranking[r]];
      out << csv_field(report.owner) << ',' << csv_field(s.name) << ',' << format_double(s.score) << ',' << s.rank
          << '\n';
    }
  }
  finish(out, path);
}

void write_shapes_csv(const std::filesystem::path& path, std::span<const ShapeCurve> curves,
                      std::span<const std::string> feature_names) {
  auto out = open_for_write(path);
  out << "owner,feature,class,x,value\n";
  for (const auto& c : curves) {
    const std::string name = csv_field(feature_names[c.feature_index]);
    for (std::size_t i = 0; i < c.grid.size(); ++i) {
      out << csv_field(c.owner) << ',' << name << ',' << c.class_index << ',' << format_double(c.grid[i]) << ','
          << format_double(c.values[i]) << '\n';
    }
  }
  finish(out, path);
}

void write_grid_csv(const std::filesystem::path& path, const FeatureGrid& grid, const Scaler& scaler,
                    std::span<const std::string> feature_names) {
  auto out = open_for_write(path);
  out << "feature,index,x,x_raw\n";
  for (std::size_t k = 0; k < grid.num_features(); ++k) {
    for (std::size_t i = 0; i < grid.points[k].size(); ++i) {
      const double x = grid.points[k][i];
      out << csv_field(feature_names[k]) << ',' << i << ',' << format_double(x) << ','
          << format_double(scaler.inverse(k, x)) << '\n';
    }
  }
  finish(out, path);
}

void write_attributions_csv(const std::filesystem::path& path, const AttributionReport& report) {
  auto out = open_for_write(path);
  out << "feature,avg_attribution\n";
  for (std::size_t k = 0; k < report.feature_names.size(); ++k) {
    out << csv_field(report.feature_names[k]) << ',' << format_double(report.attribution[k]) << '\n';
  }
  finish(out, path);
}

void write_metrics_csv(const std::filesystem::path& path, const MetricRows& metrics) {
  auto out = open_for_write(path);
  out << "metric,value\n";
  for (const auto& [name, value] : metrics) out << csv_field(name) << ',' << format_double(value) << '\n';
  finish(out, path);
}

void write_shapes_svg(const std::filesystem::path& path, std::span<const ShapeCurve> curves,
                      std::span<const std::string> feature_names) {
  // Panels keyed by (feature, class), in first-seen order.
  std::vector<std::pair<std::size_t, std::size_t>> keys;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<const ShapeCurve*>> panels;
  for (const auto& c : curves) {
    const auto key = std::make_pair(c.feature_index, c.class_index);
    if (!panels.count(key)) keys.push_back(key);
    panels[key].push_back(&c);
  }
  constexpr int kW = 240, kH = 170, kPad = 28, kCols = 4;
  const int rows = static_cast<int>((keys.size() + kCols - 1) / kCols);
  auto out = open_for_write(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kCols * kW << "\" height=\"" << rows * kH
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t p = 0; p < keys.size(); ++p) {
    const int ox = static_cast<int>(p % kCols) * kW;
    const int oy = static_cast<int>(p / kCols) * kH;
    const auto& members = panels[keys[p]];
    double x_lo = members.front()->grid.front(), x_hi = members.front()->grid.back();
    double y_lo = 0.0, y_hi = 0.0;
    for (const auto* c : members) {
      for (double v : c->values) {
        y_lo = std::min(y_lo, v);
        y_hi = std::max(y_hi, v);
      }
    }
    if (!(x_hi > x_lo)) x_hi = x_lo + 1.0;
    if (!(y_hi > y_lo)) y_hi = y_lo + 1.0;
    auto sx = [&](double x) { return ox + kPad + (x - x_lo) / (x_hi - x_lo) * (kW - 2 * kPad); };
    auto sy = [&](double y) { return oy + kH - kPad - (y - y_lo) / (y_hi - y_lo) * (kH - 2 * kPad); };
    out << "<rect x=\"" << ox + kPad << "\" y=\"" << oy + kPad << "\" width=\"" << kW - 2 * kPad << "\" height=\""
        << kH - 2 * kPad << "\" fill=\"none\" stroke=\"#ccc\"/>\n";
    out << "<text x=\"" << ox + kPad << "\" y=\"" << oy + kPad - 6 << "\">" << feature_names[keys[p].first];
    if (members.front()->class_index > 0 || panels.count({keys[p].first, 1})) out << " (class " << keys[p].second << ")";
    out << "</text>\n";
    for (const auto* c : members) {
      const bool global = c->owner == "global";
      out << "<polyline fill=\"none\" stroke=\"" << (global ? "#c0392b" : "#7f8c8d") << "\" stroke-width=\""
          << (global ? 2.5 : 0.8) << "\" points=\"";
      for (std::size_t i = 0; i < c->grid.size(); ++i) {
        out << sx(c->grid[i]) << ',' << sy(c->values[i]) << ' ';
      }
      out << "\"/>\n";
    }
  }
  out << "</svg>\n";
  finish(out, path);
}

void export_reports(const InterpretReport& report, std::span<const std::string> feature_names, const Scaler& scaler,
                    const std::filesystem::path& out_dir, const AttributionReport* attributions,
                    const MetricRows* metrics) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir.string() + "': " + ec.message());
  write_contributions_csv(out_dir / "contributions.csv", report.contributions);
  write_shapes_csv(out_dir / "shapes.csv", report.curves, feature_names);
  write_grid_csv(out_dir / "grid.csv", report.grid, scaler, feature_names);
  write_shapes_svg(out_dir / "shapes.svg", report.curves, feature_names);
  if (attributions != nullptr) write_attributions_csv(out_dir / "attributions.csv", *attributions);
  if (metrics != nullptr) write_metrics_csv(out_dir / "metrics.csv", *metrics);
}

std::vector<ShapeCurve> read_shapes_csv(const std::filesystem::path& path, std::span<const std::string> feature_names) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  if (line != "owner,feature,class,x,value") throw DataError("unexpected shapes.csv header");
  std::vector<ShapeCurve> curves;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 5) throw DataError("malformed shapes.csv row: " + line);
    const auto it = std::find(feature_names.begin(), feature_names.end(), f[1]);
    if (it == feature_names.end()) throw DataError("unknown feature in shapes.csv: " + f[1]);
    const auto k = static_cast<std::size_t>(it - feature_names.begin());
    const auto c = static_cast<std::size_t>(std::stoul(f[2]));
    if (curves.empty() || curves.back().owner != f[0] || curves.back().feature_index != k ||
        curves.back().class_index != c) {
      ShapeCurve curve;
      curve.owner = f[0];
      curve.feature_index = k;
      curve.class_index = c;
      curves.push_back(std::move(curve));
    }
    double x = 0.0, v = 0.0;
    std::from_chars(f[3].data(), f[3].data() + f[3].size(), x);
    std::from_chars(f[4].data(), f[4].data() + f[4].size(), v);
    curves.back().grid.push_back(x);
    curves.back().values.push_back(v);
  }
  return curves;
}

}  // namespace fednam

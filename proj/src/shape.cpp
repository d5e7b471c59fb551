#include "fednam/shape.hpp"

#include <algorithm>

#include "fednam/data.hpp"
#include "fednam/kernels.hpp"

namespace fednam {

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {lo};
  std::vector<double> out(n);
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + step * static_cast<double>(i);
  out.back() = hi;
  return out;
}

FeatureGrid FeatureGrid::from_data(const Matrix& X, std::span<const std::string> feature_names,
                                   std::size_t resolution) {
  if (X.rows() == 0) throw DataError("feature grid: no rows");
  FeatureGrid grid;
  for (std::size_t c = 0; c < X.cols(); ++c) {
    double lo = X(0, c);
    double hi = X(0, c);
    for (std::size_t r = 1; r < X.rows(); ++r) {
      lo = std::min(lo, X(r, c));
      hi = std::max(hi, X(r, c));
    }
    if (!(hi > lo)) {
      const std::string name = c < feature_names.size() ? feature_names[c] : std::to_string(c);
      warn("feature '" + name + "' has a degenerate range; its shape curve has a single point");
      grid.points.push_back({lo});
    } else {
      grid.points.push_back(linspace(lo, hi, resolution));
    }
  }
  return grid;
}

void center_curve(ShapeCurve& curve) {
  double sum = 0.0;
  for (double v : curve.raw) sum += v;
  curve.offset = curve.raw.empty() ? 0.0 : sum / static_cast<double>(curve.raw.size());
  curve.values.resize(curve.raw.size());
  for (std::size_t i = 0; i < curve.raw.size(); ++i) curve.values[i] = curve.raw[i] - curve.offset;
}

ShapeCurve sample_shape_curve(const NamModel& model, std::size_t feature, std::size_t class_index,
                              std::span<const double> grid, std::string owner) {
  if (feature >= model.num_features()) throw ShapeError("sample_shape_curve: feature index out of range");
  if (class_index >= model.num_outputs()) throw ShapeError("sample_shape_curve: class index out of range");
  ShapeCurve curve;
  curve.feature_index = feature;
  curve.class_index = class_index;
  curve.owner = std::move(owner);
  curve.grid.assign(grid.begin(), grid.end());
  curve.raw = kernels::feature_net_outputs(model.nets[feature], grid);
  const double w = model.output_weights(class_index, feature);
  for (double& v : curve.raw) v *= w;
  center_curve(curve);
  return curve;
}

ShapeCurve average_curves(std::span<const ShapeCurve> curves, std::string owner) {
  if (curves.empty()) throw ShapeError("average_curves: no curves");
  const auto& first = curves.front();
  for (const auto& c : curves) {
    if (c.grid != first.grid) throw ShapeError("average_curves: curves were sampled on different grids");
    if (c.feature_index != first.feature_index || c.class_index != first.class_index) {
      throw ShapeError("average_curves: curves describe different feature/class pairs");
    }
  }
  ShapeCurve out;
  out.feature_index = first.feature_index;
  out.class_index = first.class_index;
  out.owner = std::move(owner);
  out.grid = first.grid;
  out.raw.assign(first.grid.size(), 0.0);
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < out.raw.size(); ++i) out.raw[i] += c.raw[i];
  }
  const double n = static_cast<double>(curves.size());
  for (double& v : out.raw) v /= n;
  center_curve(out);
  return out;
}

}  // namespace fednam

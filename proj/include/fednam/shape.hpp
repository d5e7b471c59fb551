#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fednam/matrix.hpp"
#include "fednam/nam.hpp"

namespace fednam {

inline constexpr std::size_t kGridPoints = 101;

/// Shared evaluation grid: for each feature, evenly spaced points over its observed
/// training range (standardized units). A constant feature gets a single point.
struct FeatureGrid {
  std::vector<std::vector<double>> points;

  static FeatureGrid from_data(const Matrix& X, std::span<const std::string> feature_names = {},
                               std::size_t resolution = kGridPoints);
  std::size_t num_features() const noexcept { return points.size(); }

  friend bool operator==(const FeatureGrid&, const FeatureGrid&) = default;
};

/// Evenly spaced, strictly increasing grid with exact endpoints.
std::vector<double> linspace(double lo, double hi, std::size_t n);

/// Sampled effective shape g_{c,k}(x) = output_weights(c,k) * f_k(x).
/// `raw` holds g itself; `values` is raw minus `offset`, the grid mean of raw.
struct ShapeCurve {
  std::size_t feature_index = 0;
  std::size_t class_index = 0;
  std::string owner;
  std::vector<double> grid;
  std::vector<double> raw;
  std::vector<double> values;
  double offset = 0.0;
};

/// Sets `offset` to the grid mean of `raw` and `values` to the centered curve.
void center_curve(ShapeCurve& curve);

/// Samples g_{c,k} over `grid` and centers it.
ShapeCurve sample_shape_curve(const NamModel& model, std::size_t feature, std::size_t class_index,
                              std::span<const double> grid, std::string owner);

/// Pointwise arithmetic mean of the raw curves (sum in the given order, divided by the
/// curve count), then centered. Throws ShapeError if the curves do not share a grid,
/// feature and class.
ShapeCurve average_curves(std::span<const ShapeCurve> curves, std::string owner);

}  // namespace fednam

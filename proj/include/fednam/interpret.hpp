#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fednam/baseline.hpp"
#include "fednam/data.hpp"
#include "fednam/federation.hpp"
#include "fednam/nam.hpp"
#include "fednam/shape.hpp"

namespace fednam {

struct FeatureScore {
  std::size_t feature_index = 0;
  std::string name;
  double score = 0.0;
  std::size_t rank = 0;  // 1 = most important
};

/// Per-feature importance for one owner (a client or the global model).
struct ContributionReport {
  std::string owner;
  std::vector<FeatureScore> scores;    // feature order
  std::vector<std::size_t> ranking;    // feature indices, most important first

  const FeatureScore& by_name(const std::string& name) const;
  /// Names of the `n` highest-ranked features.
  std::vector<std::string> top(std::size_t n) const;
};

/// score_k = mean over classes c of mean over rows |g_{c,k}(x_k) - mean_rows g_{c,k}|.
/// Rows are the owner's own data in standardized units. Ties rank by feature index.
ContributionReport contribution_scores(const NamModel& model, const Matrix& X, std::string owner);

/// Plain-loop twin of contribution_scores used as the test reference.
ContributionReport contribution_scores_serial(const NamModel& model, const Matrix& X, std::string owner);

/// Everything the reports export: per-client and global contributions, per-client curves
/// and the function-averaged global curves on one shared grid.
struct InterpretReport {
  FeatureGrid grid;
  std::vector<ContributionReport> contributions;  // clients in order, then "global"
  std::vector<ShapeCurve> curves;                 // clients in order, then "global"
};

std::string client_owner_name(std::size_t client_id);

/// Per-client reports use each client's model on its own rows; the global contribution
/// report uses the parameter-averaged `global_model` on `full_train`. Global curves
/// ("global") are the pointwise average of the client curves, or samples of `global_model`
/// under WeightAverage; Both additionally emits the sampled curves as "global_fedavg".
InterpretReport global_interpret(std::span<const NamModel* const> client_models,
                                 std::span<const Matrix* const> client_rows, const NamModel& global_model,
                                 const Matrix& full_train, Aggregation aggregation = Aggregation::ShapeAverage);

struct AttributionReport {
  std::vector<std::string> feature_names;
  std::vector<double> attribution;  // mean over rows of (d logit / d x_k) * x_k
};

/// Input-times-gradient attribution of the baseline DNN over the rows of `data`.
/// Binary: the single logit. Multiclass: the logit of each row's predicted class.
AttributionReport input_x_gradient(const BaselineDnn& model, const Matrix& X);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

using MetricRows = std::vector<std::pair<std::string, double>>;

void write_contributions_csv(const std::filesystem::path& path, std::span<const ContributionReport> reports);
void write_shapes_csv(const std::filesystem::path& path, std::span<const ShapeCurve> curves,
                      std::span<const std::string> feature_names);
/// feature,index,x,x_raw: the standardized grid and the same points in raw units.
void write_grid_csv(const std::filesystem::path& path, const FeatureGrid& grid, const Scaler& scaler,
                    std::span<const std::string> feature_names);
void write_attributions_csv(const std::filesystem::path& path, const AttributionReport& report);
void write_metrics_csv(const std::filesystem::path& path, const MetricRows& metrics);
/// Small-multiples plot: one panel per (feature, class); client curves thin, global thick.
void write_shapes_svg(const std::filesystem::path& path, std::span<const ShapeCurve> curves,
                      std::span<const std::string> feature_names);

/// Writes contributions.csv, shapes.csv, grid.csv, shapes.svg, and, when provided,
/// attributions.csv and metrics.csv into `out_dir` (created if missing).
void export_reports(const InterpretReport& report, std::span<const std::string> feature_names, const Scaler& scaler,
                    const std::filesystem::path& out_dir, const AttributionReport* attributions = nullptr,
                    const MetricRows* metrics = nullptr);

/// Parses shapes.csv back into curves (values only; raw/offset left empty).
std::vector<ShapeCurve> read_shapes_csv(const std::filesystem::path& path, std::span<const std::string> feature_names);

}  // namespace fednam

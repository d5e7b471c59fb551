#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fednam/matrix.hpp"
#include "fednam/nn.hpp"

namespace fednam {

/// Sink for non-fatal diagnostics (constant feature, stratification fallback, ...).
/// Defaults to standard error; tests may swap it. An empty sink restores the default.
using WarningSink = std::function<void(const std::string&)>;
void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

/// Parsed CSV. Categorical columns are encoded as the index of the level in
/// alphabetically sorted level order; `levels` keeps the names.
struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::map<std::string, std::vector<std::string>> levels;

  std::size_t num_rows() const noexcept { return rows.size(); }
  std::size_t num_cols() const noexcept { return header.size(); }
  /// Column position by name; throws DataError if absent.
  std::size_t column(std::string_view name) const;
};

struct CsvOptions {
  /// Columns whose non-numeric cells are label-encoded instead of rejected.
  std::vector<std::string> categorical_columns;
};

/// Comma-separated file with a header row. Quoted fields are unquoted; empty cells,
/// ragged rows and non-numeric cells outside categorical columns raise DataError
/// carrying the 1-based line number.
RawTable load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
RawTable parse_csv(std::string_view text, const CsvOptions& options = {}, std::string_view source = "<memory>");

enum class DatasetKind { Heart, Wine, Iris };
std::string_view to_string(DatasetKind kind);
DatasetKind dataset_kind_from_string(std::string_view name);

/// Expected columns and categorical declarations for a built-in dataset.
struct DatasetSchema {
  std::vector<std::string> features;
  std::string target;
  std::vector<std::string> categorical;
};
const DatasetSchema& schema_for(DatasetKind kind);
CsvOptions csv_options_for(DatasetKind kind);

/// Labelled feature matrix.
struct Dataset {
  Matrix X;
  std::vector<int> y;
  std::vector<std::string> feature_names;
  Task task = Task::Binary;
  std::size_t num_classes = 2;
  std::vector<std::string> class_names;

  std::size_t size() const noexcept { return y.size(); }
  Dataset subset(std::span<const std::size_t> indices) const;
  /// Concatenates datasets with identical feature layout.
  static Dataset concat(std::span<const Dataset> parts);
};

/// Per-feature z-score parameters, fitted on training rows only.
struct Scaler {
  std::vector<double> mean;
  std::vector<double> stddev;

  static Scaler fit(const Matrix& X, std::span<const std::string> feature_names = {});
  Matrix transform(const Matrix& X) const;
  double inverse(std::size_t feature, double z) const { return mean[feature] + stddev[feature] * z; }

  friend bool operator==(const Scaler&, const Scaler&) = default;
};

struct SplitSpec {
  double test_fraction = 0.20;
  double val_fraction = 0.10;  // of each client shard
  bool stratified = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PreprocessOptions {
  /// Overrides the dataset's target column; all other columns become features.
  std::optional<std::string> target_col;
  /// Iris only: keep setosa and versicolor as a binary task.
  bool iris_two_class = false;
  /// Wine: label 1 iff quality >= threshold.
  double wine_threshold = 6.0;
};

/// Labelled dataset in raw units, before splitting and scaling.
Dataset extract_dataset(const RawTable& raw, DatasetKind kind, const PreprocessOptions& options = {});

struct IndexSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Label-stratified (per-class rounding) split, falling back to an unstratified split with a
/// warning when any class has fewer than two members. Both halves are sorted ascending.
IndexSplit train_test_split(std::span<const int> labels, double test_fraction, bool stratified, std::uint64_t seed);

struct PreparedData {
  Dataset train;  // standardized
  Dataset test;   // standardized with the training scaler
  Scaler scaler;
  Matrix raw_train;  // unscaled training rows, for raw-unit plotting
};

/// Target encoding, train/test split and z-scoring fitted on the training split.
PreparedData preprocess(const RawTable& raw, DatasetKind kind, const SplitSpec& split,
                        const PreprocessOptions& options = {});

}  // namespace fednam

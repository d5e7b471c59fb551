#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "fednam/baseline.hpp"
#include "fednam/control.hpp"
#include "fednam/data.hpp"
#include "fednam/federation.hpp"
#include "fednam/nam.hpp"

namespace fednam {

struct DatasetConfig {
  DatasetKind kind = DatasetKind::Heart;
  std::filesystem::path csv;
  std::optional<std::string> target_col;
  bool iris_two_class = false;
  double wine_threshold = 6.0;
};

/// Everything one CLI command needs. `seed` drives the split, the partition, model
/// initialization and training; the per-section seed fields are derived from it.
struct RunConfig {
  DatasetConfig dataset;
  SplitSpec split;
  FederationConfig federation;
  NamConfig model;
  BaselineConfig baseline;
  TrainingConfig training;
  HyperGrid grid;
  double threshold = 0.5;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  int jobs = 1;

  /// Copies `seed` and `jobs` into the nested sections.
  void sync();
  /// Throws ConfigError on any invalid value.
  void validate() const;
};

/// Parses a config document. Missing keys keep their defaults; unknown keys and values of
/// the wrong type raise ConfigError. A relative dataset path is resolved against `base_dir`.
RunConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const RunConfig& config);

/// Reads and parses a config file (relative CSV paths resolve against the file's directory).
RunConfig load_config(const std::filesystem::path& path);

/// Stock configuration for a dataset: its schema's target column and the default sections.
RunConfig default_config(DatasetKind kind);

}  // namespace fednam

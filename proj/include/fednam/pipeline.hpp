#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "fednam/baseline.hpp"
#include "fednam/config.hpp"
#include "fednam/federation.hpp"
#include "fednam/interpret.hpp"
#include "fednam/nam.hpp"

namespace fednam {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitData = 2, kExitTraining = 3 };

/// Loaded, split and standardized data plus the per-client shards.
struct PipelineData {
  PreparedData prepared;
  std::vector<ClientData> clients;
};

PipelineData prepare_pipeline(const RunConfig& config);

NamModel initial_nam(const RunConfig& config, const Dataset& train, std::uint64_t seed);
BaselineDnn initial_baseline(const RunConfig& config, const Dataset& train, std::uint64_t seed);

/// Test-set metrics at the configured decision threshold.
template <class Model>
ClassificationMetrics test_metrics(const Model& model, const Dataset& test, double threshold) {
  const Matrix logits = kernels::predict_logits(model, test.X);
  const auto task = ModelOps<Model>::task(model);
  const auto probs = kernels::logits_to_probabilities(logits, task);
  return compute_metrics(probs, test.y, task, test.num_classes, threshold);
}

struct NamRun {
  FederationResult<NamModel> federation;
  ClassificationMetrics test;
  InterpretReport report;
};

/// Federated NAM training followed by test evaluation and the interpretability report.
/// `training_seed` seeds initialization and local training; the partition in `data`
/// is fixed by the caller. Throws TrainingError if any client fails.
NamRun train_nam(const RunConfig& config, const PipelineData& data, std::uint64_t training_seed);

struct BaselineRun {
  FederationResult<BaselineDnn> federation;
  ClassificationMetrics test;
  AttributionReport attribution;
};

BaselineRun train_baseline(const RunConfig& config, const PipelineData& data, std::uint64_t training_seed);

/// trial results for every grid point plus the winner.
struct TuneRun {
  GridSearchResult search;
  RunConfig best;
};

TuneRun tune(const RunConfig& config, const PipelineData& data);

/// The CLI commands. Each writes into `config.output_dir` only after its computation has
/// finished and throws on failure; run_command maps the exception to an exit code.
void cmd_train(const RunConfig& config);
void cmd_explain(const RunConfig& config, const std::filesystem::path& model_path);
void cmd_tune(const RunConfig& config);
void cmd_benchmark(const RunConfig& config);

/// Runs `fn`, printing any error to `err`: 1 config/schema, 2 data/IO, 3 training.
int run_command(const std::function<void()>& fn, std::ostream& err);

void write_rounds_csv(const std::filesystem::path& path, std::span<const RoundLog> rounds);
void write_trials_csv(const std::filesystem::path& path, std::span<const TrialResult> trials,
                      std::size_t num_clients);

}  // namespace fednam

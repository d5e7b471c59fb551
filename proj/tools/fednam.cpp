// fednam: federated Neural Additive Model trainer and report generator.
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fednam/config.hpp"
#include "fednam/errors.hpp"
#include "fednam/pipeline.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> jobs;
  std::optional<std::string> dataset;
  std::optional<std::string> csv;
  std::optional<std::string> target_col;
  std::optional<double> threshold;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON run configuration");
  cmd->add_option("--seed", o.seed, "Global random seed");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--jobs", o.jobs, "Worker threads for clients, trials and batch kernels");
  cmd->add_option("--dataset", o.dataset, "Dataset kind")->check(CLI::IsMember({"heart", "wine", "iris"}));
  cmd->add_option("--csv", o.csv, "Dataset CSV path");
  cmd->add_option("--target-col", o.target_col, "Name of the label column");
  cmd->add_option("--threshold", o.threshold, "Binary decision threshold");
}

fednam::RunConfig resolve(const Overrides& o) {
  fednam::RunConfig cfg;
  if (!o.config.empty()) {
    cfg = fednam::load_config(o.config);
  } else if (!o.dataset) {
    throw fednam::ConfigError("either --config or --dataset is required");
  }
  if (o.dataset) cfg.dataset.kind = fednam::dataset_kind_from_string(*o.dataset);
  if (o.csv) cfg.dataset.csv = *o.csv;
  if (o.target_col) cfg.dataset.target_col = *o.target_col;
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.output_dir = *o.out;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.threshold) cfg.threshold = *o.threshold;
  cfg.sync();
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated Neural Additive Models: train, explain, tune and benchmark"};
  app.require_subcommand(1);

  Overrides train_o, explain_o, tune_o, bench_o;
  std::string model_path;
  auto* train = app.add_subcommand("train", "Train a federated NAM and export reports");
  add_common(train, train_o);
  auto* explain = app.add_subcommand("explain", "Rebuild reports from saved models");
  add_common(explain, explain_o);
  explain->add_option("--model", model_path, "model.json or the directory holding it")->required();
  auto* tune = app.add_subcommand("tune", "Grid search over the hyperparameter grid");
  add_common(tune, tune_o);
  auto* bench = app.add_subcommand("benchmark", "Compare the federated NAM with a federated DNN");
  add_common(bench, bench_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : fednam::kExitConfig;
  }

  return fednam::run_command(
      [&] {
        if (train->parsed()) fednam::cmd_train(resolve(train_o));
        if (explain->parsed()) fednam::cmd_explain(resolve(explain_o), model_path);
        if (tune->parsed()) fednam::cmd_tune(resolve(tune_o));
        if (bench->parsed()) fednam::cmd_benchmark(resolve(bench_o));
      },
      std::cerr);
}

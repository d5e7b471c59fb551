#include "fednam/pipeline.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "fednam/errors.hpp"
#include "fednam/kernels.hpp"

namespace fednam {

namespace {

std::uint64_t nam_init_seed(std::uint64_t seed) { return derive_seed(seed, {0x4a3}); }
std::uint64_t baseline_init_seed(std::uint64_t seed) { return derive_seed(seed, {0xd11}); }
std::uint64_t trial_seed(std::uint64_t seed, std::size_t trial) { return derive_seed(seed, {0x7e1a, trial}); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void make_output_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

std::string client_model_file(std::size_t client_id) { return "client_" + std::to_string(client_id + 1) + ".json"; }

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

void write_run_info(const std::filesystem::path& dir, const std::string& command, const RunConfig& config,
                    const std::string& started) {
  const nlohmann::json info = {{"command", command},
                               {"started", started},
                               {"finished", utc_now()},
                               {"seed", config.seed},
                               {"jobs", config.jobs}};
  write_text(dir / "run_info.json", info.dump(2) + "\n");
}

template <class Model>
void throw_if_failed(const FederationResult<Model>& result) {
  if (result.failed) throw TrainingError(result.failed_client, result.error);
}

FederationConfig with_seed(FederationConfig fed, std::uint64_t seed) {
  fed.seed = seed;
  return fed;
}

MetricRows metric_rows(const ClassificationMetrics& m, std::size_t test_rows) {
  return {{"accuracy", m.accuracy},
          {"auc", m.auc},
          {"log_loss", m.log_loss},
          {"test_rows", static_cast<double>(test_rows)}};
}

void check_feature_names(const NamModel& model, const Dataset& data, const std::string& source) {
  if (model.feature_names != data.feature_names) {
    throw DataError("model '" + source + "' was trained on different features than the configured dataset");
  }
}

}  // namespace

PipelineData prepare_pipeline(const RunConfig& config) {
  config.validate();
  if (!std::filesystem::exists(config.dataset.csv)) {
    throw DataError("dataset file not found: '" + config.dataset.csv.string() + "'");
  }
  const RawTable raw = load_csv(config.dataset.csv, csv_options_for(config.dataset.kind));
  PreprocessOptions opts;
  opts.target_col = config.dataset.target_col;
  opts.iris_two_class = config.dataset.iris_two_class;
  opts.wine_threshold = config.dataset.wine_threshold;
  PipelineData out;
  out.prepared = preprocess(raw, config.dataset.kind, config.split, opts);
  out.clients = make_client_data(out.prepared.train, config.federation, config.split);
  return out;
}

NamModel initial_nam(const RunConfig& config, const Dataset& train, std::uint64_t seed) {
  return make_nam(train.feature_names, train.task, train.num_classes, config.model, nam_init_seed(seed));
}

BaselineDnn initial_baseline(const RunConfig& config, const Dataset& train, std::uint64_t seed) {
  return make_baseline_dnn(train.feature_names, train.task, train.num_classes, config.baseline,
                           baseline_init_seed(seed));
}

NamRun train_nam(const RunConfig& config, const PipelineData& data, std::uint64_t training_seed) {
  NamRun run;
  const NamModel init = initial_nam(config, data.prepared.train, training_seed);
  run.federation = run_federation(init, data.clients, with_seed(config.federation, training_seed), config.training);
  throw_if_failed(run.federation);
  run.test = test_metrics(run.federation.global, data.prepared.test, config.threshold);

  std::vector<const NamModel*> models;
  std::vector<const Matrix*> rows;
  for (const auto& c : run.federation.clients) {
    models.push_back(&c.model);
    rows.push_back(&c.data.train.X);
  }
  run.report = global_interpret(models, rows, run.federation.global, data.prepared.train.X,
                                config.federation.aggregation);
  return run;
}

BaselineRun train_baseline(const RunConfig& config, const PipelineData& data, std::uint64_t training_seed) {
  BaselineRun run;
  const BaselineDnn init = initial_baseline(config, data.prepared.train, training_seed);
  run.federation = run_federation(init, data.clients, with_seed(config.federation, training_seed), config.training);
  throw_if_failed(run.federation);
  run.test = test_metrics(run.federation.global, data.prepared.test, config.threshold);
  run.attribution = input_x_gradient(run.federation.global, data.prepared.test.X);
  return run;
}

TuneRun tune(const RunConfig& config, const PipelineData& data) {
  const auto runner = [&](const HyperParams& p, std::size_t trial_id) {
    RunConfig trial_cfg = config;
    trial_cfg.model.dropout = p.dropout;
    trial_cfg.model.hidden_layers = p.hidden_layers;
    trial_cfg.training.learning_rate = p.learning_rate;
    trial_cfg.training.batch_size = p.batch_size;
    // Trials already run concurrently; keep each federation single-threaded.
    trial_cfg.federation.jobs = 1;

    const std::uint64_t seed = trial_seed(config.seed, trial_id);
    const NamModel init = initial_nam(trial_cfg, data.prepared.train, seed);
    const auto fed = run_federation(init, data.clients, with_seed(trial_cfg.federation, seed), trial_cfg.training);
    throw_if_failed(fed);

    TrialResult r;
    r.trial_id = trial_id;
    r.params = p;
    const RoundLog& last = fed.rounds.back();
    double sum = 0.0;
    for (const auto& c : last.clients) {
      r.client_val_acc.push_back(c.val_acc);
      sum += c.val_acc;
    }
    r.mean_val_acc = sum / static_cast<double>(last.clients.size());
    r.global_val_auc = last.global_val_auc;
    const auto test = test_metrics(fed.global, data.prepared.test, trial_cfg.threshold);
    r.global_test_acc = test.accuracy;
    r.global_test_auc = test.auc;
    return r;
  };

  TuneRun out;
  out.search = grid_search(config.grid, runner, config.jobs);
  if (!out.search.best_index) throw TrainingError(0, "every grid-search trial failed");
  const HyperParams& best = out.search.best();
  out.best = config;
  out.best.model.dropout = best.dropout;
  out.best.model.hidden_layers = best.hidden_layers;
  out.best.training.learning_rate = best.learning_rate;
  out.best.training.batch_size = best.batch_size;
  return out;
}

void write_rounds_csv(const std::filesystem::path& path, std::span<const RoundLog> rounds) {
  std::ostringstream out;
  out << "round,client_id,train_loss,val_loss,val_acc,global_val_acc,global_val_auc\n";
  for (const auto& r : rounds) {
    for (const auto& c : r.clients) {
      out << r.round << ',' << c.client_id + 1 << ',' << format_double(c.train_loss) << ','
          << format_double(c.val_loss) << ',' << format_double(c.val_acc) << ',' << format_double(r.global_val_acc)
          << ',' << format_double(r.global_val_auc) << '\n';
    }
  }
  write_text(path, out.str());
}

void write_trials_csv(const std::filesystem::path& path, std::span<const TrialResult> trials,
                      std::size_t num_clients) {
  const std::string nan = format_double(std::numeric_limits<double>::quiet_NaN());
  std::ostringstream out;
  out << "trial_id,dropout,lr,layers,batch";
  for (std::size_t i = 0; i < num_clients; ++i) out << ",client" << i + 1 << "_val_acc";
  out << ",mean_val_acc,global_test_acc,global_test_auc\n";
  for (const auto& t : trials) {
    out << t.trial_id << ',' << format_double(t.params.dropout) << ',' << format_double(t.params.learning_rate) << ','
        << t.params.hidden_layers << ',' << t.params.batch_size;
    for (std::size_t i = 0; i < num_clients; ++i) {
      out << ',' << (t.failed || i >= t.client_val_acc.size() ? nan : format_double(t.client_val_acc[i]));
    }
    if (t.failed) {
      out << ',' << nan << ',' << nan << ',' << nan << '\n';
    } else {
      out << ',' << format_double(t.mean_val_acc) << ',' << format_double(t.global_test_acc) << ','
          << format_double(t.global_test_auc) << '\n';
    }
  }
  write_text(path, out.str());
}

void cmd_train(const RunConfig& config) {
  const std::string started = utc_now();
  kernels::set_threads(config.jobs);
  const PipelineData data = prepare_pipeline(config);
  const NamRun run = train_nam(config, data, config.seed);

  const auto& dir = config.output_dir;
  make_output_dir(dir);
  write_text(dir / "model.json", nam_to_json(run.federation.global));
  for (const auto& c : run.federation.clients) write_text(dir / client_model_file(c.client_id), nam_to_json(c.model));
  write_rounds_csv(dir / "rounds.csv", run.federation.rounds);
  const MetricRows metrics = metric_rows(run.test, data.prepared.test.size());
  export_reports(run.report, data.prepared.train.feature_names, data.prepared.scaler, dir, nullptr, &metrics);
  write_text(dir / "config.json", config_to_json(config).dump(2) + "\n");
  write_run_info(dir, "train", config, started);
}

void cmd_explain(const RunConfig& config, const std::filesystem::path& model_path) {
  const std::string started = utc_now();
  kernels::set_threads(config.jobs);
  const auto model_file = std::filesystem::is_directory(model_path) ? model_path / "model.json" : model_path;
  const NamModel global = nam_from_json(read_text(model_file));
  std::vector<NamModel> clients;
  for (std::size_t i = 0; i < config.federation.num_clients; ++i) {
    const auto path = model_file.parent_path() / client_model_file(i);
    clients.push_back(nam_from_json(read_text(path)));
  }

  const PipelineData data = prepare_pipeline(config);
  check_feature_names(global, data.prepared.train, model_file.string());
  for (std::size_t i = 0; i < clients.size(); ++i) {
    check_feature_names(clients[i], data.prepared.train, client_model_file(i));
    if (!same_architecture(clients[i], global)) {
      throw DataError(client_model_file(i) + " does not match the architecture of " + model_file.string());
    }
  }

  std::vector<const NamModel*> models;
  std::vector<const Matrix*> rows;
  for (std::size_t i = 0; i < clients.size(); ++i) {
    models.push_back(&clients[i]);
    rows.push_back(&data.clients[i].train.X);
  }
  const InterpretReport report =
      global_interpret(models, rows, global, data.prepared.train.X, config.federation.aggregation);

  make_output_dir(config.output_dir);
  export_reports(report, data.prepared.train.feature_names, data.prepared.scaler, config.output_dir);
  write_run_info(config.output_dir, "explain", config, started);
}

void cmd_tune(const RunConfig& config) {
  const std::string started = utc_now();
  const PipelineData data = prepare_pipeline(config);
  const TuneRun result = tune(config, data);
  for (const auto& t : result.search.trials) {
    if (t.failed) warn("trial " + std::to_string(t.trial_id) + " failed: " + t.error);
  }

  make_output_dir(config.output_dir);
  write_trials_csv(config.output_dir / "trials.csv", result.search.trials, config.federation.num_clients);
  write_text(config.output_dir / "best.json", config_to_json(result.best).dump(2) + "\n");
  write_run_info(config.output_dir, "tune", config, started);
}

void cmd_benchmark(const RunConfig& config) {
  const std::string started = utc_now();
  kernels::set_threads(config.jobs);
  const PipelineData data = prepare_pipeline(config);
  const NamRun nam = train_nam(config, data, config.seed);
  const BaselineRun dnn = train_baseline(config, data, config.seed);

  std::ostringstream out;
  out << "section,name,accuracy,auc,attribution\n";
  out << "model,fednam," << format_double(nam.test.accuracy) << ',' << format_double(nam.test.auc) << ",\n";
  out << "model,dnn," << format_double(dnn.test.accuracy) << ',' << format_double(dnn.test.auc) << ",\n";
  for (std::size_t k = 0; k < dnn.attribution.feature_names.size(); ++k) {
    out << "attribution," << dnn.attribution.feature_names[k] << ",,," << format_double(dnn.attribution.attribution[k])
        << '\n';
  }

  make_output_dir(config.output_dir);
  write_text(config.output_dir / "benchmark.csv", out.str());
  write_attributions_csv(config.output_dir / "attributions.csv", dnn.attribution);
  write_run_info(config.output_dir, "benchmark", config, started);
}

int run_command(const std::function<void()>& fn, std::ostream& err) {
  try {
    fn();
    return kExitOk;
  } catch (const SchemaVersionError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const TrainingError& e) {
    err << "training failed: " << e.what() << '\n';
    return kExitTraining;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kExitData;
  } catch (const ShapeError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitTraining;
  }
}

}  // namespace fednam

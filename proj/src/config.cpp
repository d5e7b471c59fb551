#include "fednam/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "fednam/errors.hpp"

namespace fednam {

using nlohmann::json;

namespace {

// Reads typed fields out of one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(path_ + " must be a JSON object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = doc_.find(key);
    if (it == doc_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where(key) + " has the wrong type");
    }
  }

  void get_size(const char* key, std::size_t& out) {
    seen_.insert(key);
    const auto it = doc_.find(key);
    if (it == doc_.end()) return;
    if (!it->is_number_integer() || it->get<long long>() < 0) {
      throw ConfigError(where(key) + " must be a non-negative integer");
    }
    out = it->get<std::size_t>();
  }

  template <class Fn>
  void section(const char* key, Fn&& fn) {
    seen_.insert(key);
    const auto it = doc_.find(key);
    if (it == doc_.end()) return;
    Section sub(*it, where(key));
    fn(sub);
    sub.finish();
  }

  template <class Fn>
  void text(const char* key, Fn&& fn) {
    std::string value;
    bool present = doc_.contains(key);
    get(key, value);
    if (!present) return;
    try {
      fn(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  void finish() const {
    for (const auto& [key, value] : doc_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + where(key) + "'");
    }
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

void RunConfig::sync() {
  split.seed = seed;
  federation.seed = seed;
  federation.jobs = jobs;
}

void RunConfig::validate() const {
  if (dataset.csv.empty()) throw ConfigError("dataset.csv is required");
  split.validate();
  federation.validate();
  training.validate();
  if (model.hidden_layers < 1) throw ConfigError("model.hidden_layers must be >= 1");
  if (model.hidden_units < 1) throw ConfigError("model.hidden_units must be >= 1");
  if (model.unit != ActivationKind::ReLU && model.unit != ActivationKind::ExU) {
    throw ConfigError("model.unit must be relu or exu");
  }
  if (!(model.dropout >= 0.0 && model.dropout < 1.0)) throw ConfigError("model.dropout must lie in [0,1)");
  if (baseline.hidden_layers < 1 || baseline.hidden_units < 1) throw ConfigError("baseline layers/units must be >= 1");
  if (!(baseline.dropout >= 0.0 && baseline.dropout < 1.0)) throw ConfigError("baseline.dropout must lie in [0,1)");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0,1)");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  if (grid.dropout.empty() || grid.learning_rate.empty() || grid.hidden_layers.empty() || grid.batch_size.empty()) {
    throw ConfigError("every grid axis needs at least one value");
  }
  for (double d : grid.dropout) {
    if (!(d >= 0.0 && d < 1.0)) throw ConfigError("grid.dropout values must lie in [0,1)");
  }
  for (double lr : grid.learning_rate) {
    if (!(std::isfinite(lr) && lr >= 0.0)) throw ConfigError("grid.learning_rate values must be finite and >= 0");
  }
  for (std::size_t l : grid.hidden_layers) {
    if (l < 1) throw ConfigError("grid.hidden_layers values must be >= 1");
  }
  for (std::size_t b : grid.batch_size) {
    if (b < 1) throw ConfigError("grid.batch_size values must be >= 1");
  }
}

RunConfig config_from_json(const json& doc, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  Section root(doc, "");
  root.section("dataset", [&](Section& s) {
    s.text("kind", [&](const std::string& v) { cfg.dataset.kind = dataset_kind_from_string(v); });
    std::string csv;
    s.get("csv", csv);
    if (!csv.empty()) {
      std::filesystem::path p(csv);
      cfg.dataset.csv = (p.is_relative() && !base_dir.empty()) ? base_dir / p : p;
    }
    std::string target;
    s.get("target_col", target);
    if (!target.empty()) cfg.dataset.target_col = target;
    s.get("iris_two_class", cfg.dataset.iris_two_class);
    s.get("wine_threshold", cfg.dataset.wine_threshold);
  });
  root.section("split", [&](Section& s) {
    s.get("test_fraction", cfg.split.test_fraction);
    s.get("val_fraction", cfg.split.val_fraction);
    s.get("stratified", cfg.split.stratified);
  });
  root.section("federation", [&](Section& s) {
    s.get_size("num_clients", cfg.federation.num_clients);
    s.get_size("rounds", cfg.federation.rounds);
    s.get_size("local_epochs", cfg.federation.local_epochs);
    s.text("aggregation", [&](const std::string& v) { cfg.federation.aggregation = aggregation_from_string(v); });
    s.get("stratified_partition", cfg.federation.stratified_partition);
  });
  root.section("model", [&](Section& s) {
    s.get_size("hidden_layers", cfg.model.hidden_layers);
    s.get_size("hidden_units", cfg.model.hidden_units);
    s.text("unit", [&](const std::string& v) { cfg.model.unit = activation_from_string(v); });
    s.get("dropout", cfg.model.dropout);
  });
  root.section("baseline", [&](Section& s) {
    s.get_size("hidden_layers", cfg.baseline.hidden_layers);
    s.get_size("hidden_units", cfg.baseline.hidden_units);
    s.get("dropout", cfg.baseline.dropout);
  });
  root.section("optimizer", [&](Section& s) {
    s.text("kind", [&](const std::string& v) { cfg.training.optimizer = optimizer_from_string(v); });
    s.get("learning_rate", cfg.training.learning_rate);
    s.get_size("batch_size", cfg.training.batch_size);
  });
  root.section("training", [&](Section& s) {
    s.get("early_stopping", cfg.training.early_stopping);
    s.get_size("patience", cfg.training.early_stop.patience);
    s.get("min_delta", cfg.training.early_stop.min_delta);
    s.get("lr_schedule", cfg.training.lr_schedule);
    s.get("lr_factor", cfg.training.schedule.factor);
    s.get_size("lr_patience", cfg.training.schedule.patience);
    s.get("min_lr", cfg.training.schedule.min_lr);
    s.get("lr_min_delta", cfg.training.schedule.min_delta);
  });
  root.section("grid", [&](Section& s) {
    s.get("dropout", cfg.grid.dropout);
    s.get("learning_rate", cfg.grid.learning_rate);
    s.get("hidden_layers", cfg.grid.hidden_layers);
    s.get("batch_size", cfg.grid.batch_size);
  });
  root.get("threshold", cfg.threshold);
  std::string out;
  root.get("output_dir", out);
  if (!out.empty()) cfg.output_dir = out;
  root.get("seed", cfg.seed);
  root.get("jobs", cfg.jobs);
  root.finish();
  cfg.sync();
  return cfg;
}

json config_to_json(const RunConfig& c) {
  json dataset = {{"kind", std::string(to_string(c.dataset.kind))},
                  {"csv", c.dataset.csv.string()},
                  {"iris_two_class", c.dataset.iris_two_class},
                  {"wine_threshold", c.dataset.wine_threshold}};
  if (c.dataset.target_col) dataset["target_col"] = *c.dataset.target_col;
  return {
      {"dataset", dataset},
      {"split",
       {{"test_fraction", c.split.test_fraction},
        {"val_fraction", c.split.val_fraction},
        {"stratified", c.split.stratified}}},
      {"federation",
       {{"num_clients", c.federation.num_clients},
        {"rounds", c.federation.rounds},
        {"local_epochs", c.federation.local_epochs},
        {"aggregation", std::string(to_string(c.federation.aggregation))},
        {"stratified_partition", c.federation.stratified_partition}}},
      {"model",
       {{"hidden_layers", c.model.hidden_layers},
        {"hidden_units", c.model.hidden_units},
        {"unit", std::string(to_string(c.model.unit))},
        {"dropout", c.model.dropout}}},
      {"baseline",
       {{"hidden_layers", c.baseline.hidden_layers},
        {"hidden_units", c.baseline.hidden_units},
        {"dropout", c.baseline.dropout}}},
      {"optimizer",
       {{"kind", std::string(to_string(c.training.optimizer))},
        {"learning_rate", c.training.learning_rate},
        {"batch_size", c.training.batch_size}}},
      {"training",
       {{"early_stopping", c.training.early_stopping},
        {"patience", c.training.early_stop.patience},
        {"min_delta", c.training.early_stop.min_delta},
        {"lr_schedule", c.training.lr_schedule},
        {"lr_factor", c.training.schedule.factor},
        {"lr_patience", c.training.schedule.patience},
        {"min_lr", c.training.schedule.min_lr},
        {"lr_min_delta", c.training.schedule.min_delta}}},
      {"grid",
       {{"dropout", c.grid.dropout},
        {"learning_rate", c.grid.learning_rate},
        {"hidden_layers", c.grid.hidden_layers},
        {"batch_size", c.grid.batch_size}}},
      {"threshold", c.threshold},
      {"output_dir", c.output_dir.string()},
      {"seed", c.seed},
      {"jobs", c.jobs},
  };
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return config_from_json(doc, path.parent_path());
}

RunConfig default_config(DatasetKind kind) {
  RunConfig cfg;
  cfg.dataset.kind = kind;
  cfg.sync();
  return cfg;
}

}  // namespace fednam

#include <doctest.h>

#include <fstream>
#include <sstream>

#include "fednam/errors.hpp"
#include "fednam/pipeline.hpp"

using namespace fednam;

namespace {

std::filesystem::path data_file(const char* name) { return std::filesystem::path(FEDNAM_DATA_DIR) / name; }

std::filesystem::path fresh_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("fednam_pipeline_" + name);
  std::filesystem::remove_all(p);
  return p;
}

RunConfig config_for(DatasetKind kind, const char* csv, const std::string& out) {
  RunConfig cfg = default_config(kind);
  cfg.dataset.csv = data_file(csv);
  cfg.output_dir = fresh_dir(out);
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::filesystem::path& p) {
  std::vector<std::string> out;
  std::ifstream in(p);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::size_t count_prefix(const std::vector<std::string>& ls, const std::string& prefix) {
  std::size_t n = 0;
  for (const auto& l : ls) n += l.rfind(prefix, 0) == 0;
  return n;
}

}  // namespace

TEST_CASE("config json round-trips and rejects unknown keys") {
  RunConfig cfg = default_config(DatasetKind::Wine);
  cfg.dataset.csv = "/tmp/x.csv";
  cfg.model.unit = ActivationKind::ExU;
  cfg.federation.rounds = 7;
  cfg.training.early_stop.patience = 4;
  cfg.grid.batch_size = {8};
  cfg.seed = 42;
  const auto doc = config_to_json(cfg);
  const RunConfig back = config_from_json(doc);
  CHECK(config_to_json(back) == doc);
  CHECK(back.federation.seed == 42);
  CHECK(back.split.seed == 42);

  auto bad = doc;
  bad["model"]["units"] = 3;
  CHECK_THROWS_WITH_AS(config_from_json(bad), doctest::Contains("model.units"), ConfigError);
  auto wrong_type = doc;
  wrong_type["federation"]["rounds"] = "ten";
  CHECK_THROWS_AS(config_from_json(wrong_type), ConfigError);
  auto bad_enum = doc;
  bad_enum["dataset"]["kind"] = "mnist";
  CHECK_THROWS_AS(config_from_json(bad_enum), ConfigError);
  auto zero_epochs = doc;
  zero_epochs["federation"]["local_epochs"] = 0;
  CHECK_THROWS_AS(config_from_json(zero_epochs).validate(), ConfigError);
}

TEST_CASE("relative csv paths resolve against the config directory") {
  const nlohmann::json doc = {{"dataset", {{"kind", "iris"}, {"csv", "iris.csv"}}}};
  CHECK(config_from_json(doc, "/some/dir").dataset.csv == std::filesystem::path("/some/dir/iris.csv"));
}

TEST_CASE("train writes every artifact and is byte-reproducible") {
  auto cfg = config_for(DatasetKind::Heart, "heart.csv", "train_a");
  cmd_train(cfg);
  const auto dir = cfg.output_dir;
  for (const char* f : {"model.json", "client_1.json", "client_2.json", "client_3.json", "rounds.csv", "metrics.csv",
                        "contributions.csv", "shapes.csv", "grid.csv", "shapes.svg", "run_info.json"}) {
    CHECK_MESSAGE(std::filesystem::exists(dir / f), f);
  }
  const auto metrics = lines(dir / "metrics.csv");
  CHECK(metrics[0] == "metric,value");
  CHECK(count_prefix(metrics, "accuracy,") == 1);
  CHECK(count_prefix(metrics, "auc,") == 1);
  // 13 features for each of 3 clients and the global model.
  CHECK(lines(dir / "contributions.csv").size() == 1 + 52);
  const auto rounds = lines(dir / "rounds.csv");
  CHECK(rounds[0] == "round,client_id,train_loss,val_loss,val_acc,global_val_acc,global_val_auc");
  CHECK(rounds.size() == 1 + 50 * 3);

  auto again = cfg;
  again.output_dir = fresh_dir("train_b");
  cmd_train(again);
  for (const char* f : {"model.json", "metrics.csv", "contributions.csv", "shapes.csv", "rounds.csv"}) {
    CHECK_MESSAGE(slurp(dir / f) == slurp(again.output_dir / f), f);
  }

  auto other = cfg;
  other.seed = 7;
  other.sync();
  other.output_dir = fresh_dir("train_c");
  cmd_train(other);
  CHECK(slurp(dir / "model.json") != slurp(other.output_dir / "model.json"));
  for (const auto& d : {dir, again.output_dir, other.output_dir}) std::filesystem::remove_all(d);
}

TEST_CASE("explain rebuilds the train-time reports") {
  auto cfg = config_for(DatasetKind::Iris, "iris.csv", "explain_train");
  cmd_train(cfg);
  auto ex = cfg;
  ex.output_dir = fresh_dir("explain_out");
  cmd_explain(ex, cfg.output_dir);
  CHECK(slurp(cfg.output_dir / "contributions.csv") == slurp(ex.output_dir / "contributions.csv"));
  CHECK(slurp(cfg.output_dir / "shapes.csv") == slurp(ex.output_dir / "shapes.csv"));
  const auto shapes = lines(ex.output_dir / "shapes.csv");
  for (const char* owner : {"client1,", "client2,", "client3,", "global,"}) {
    CHECK(count_prefix(shapes, owner) == 4 * 3 * 101);
  }

  // A corrupted model fails cleanly and leaves no outputs behind.
  const auto broken = fresh_dir("explain_broken");
  std::filesystem::create_directories(broken);
  const auto text = slurp(cfg.output_dir / "model.json");
  std::ofstream(broken / "model.json") << text.substr(0, text.size() / 3);
  auto bad = cfg;
  bad.output_dir = fresh_dir("explain_bad_out");
  std::ostringstream err;
  CHECK(run_command([&] { cmd_explain(bad, broken / "model.json"); }, err) == kExitData);
  CHECK_FALSE(std::filesystem::exists(bad.output_dir));

  std::string bumped = text;
  bumped.replace(bumped.find("\"schema_version\": 1"), 19, "\"schema_version\": 3");
  std::ofstream(broken / "model.json", std::ios::trunc) << bumped;
  std::ostringstream err2;
  CHECK(run_command([&] { cmd_explain(bad, broken / "model.json"); }, err2) == kExitConfig);
  CHECK(err2.str().find("expected 1, found 3") != std::string::npos);
  for (const auto& d : {cfg.output_dir, ex.output_dir, broken}) std::filesystem::remove_all(d);
}

TEST_CASE("exit codes for config and data errors") {
  std::ostringstream err;
  auto cfg = config_for(DatasetKind::Heart, "heart.csv", "missing");
  cfg.dataset.csv = "/no/such/heart_file.csv";
  CHECK(run_command([&] { cmd_train(cfg); }, err) == kExitData);
  CHECK(err.str().find("heart_file.csv") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(cfg.output_dir));

  auto bad = config_for(DatasetKind::Heart, "heart.csv", "badcfg");
  bad.federation.local_epochs = 0;
  CHECK(run_command([&] { cmd_train(bad); }, err) == kExitConfig);

  auto wrong_target = config_for(DatasetKind::Heart, "heart.csv", "target");
  wrong_target.dataset.target_col = "nope";
  CHECK(run_command([&] { cmd_train(wrong_target); }, err) == kExitData);

  CHECK(run_command([] { throw TrainingError(2, "nan"); }, err) == kExitTraining);
}

TEST_CASE("tune writes the trial table and the winning config") {
  auto cfg = config_for(DatasetKind::Iris, "iris.csv", "tune_single");
  cfg.grid = HyperGrid{{0.1}, {1e-3}, {2}, {16}};
  cfg.federation.rounds = 5;
  cmd_tune(cfg);
  const auto trials = lines(cfg.output_dir / "trials.csv");
  CHECK(trials[0] ==
        "trial_id,dropout,lr,layers,batch,client1_val_acc,client2_val_acc,client3_val_acc,mean_val_acc,"
        "global_test_acc,global_test_auc");
  CHECK(trials.size() == 2);
  const auto best = load_config(cfg.output_dir / "best.json");
  CHECK(best.model.dropout == 0.1);
  CHECK(best.training.learning_rate == 1e-3);
  CHECK(best.model.hidden_layers == 2);
  CHECK(best.training.batch_size == 16);
  std::filesystem::remove_all(cfg.output_dir);
}

TEST_CASE("default grid on iris yields 24 reproducible trials") {
  auto cfg = config_for(DatasetKind::Iris, "iris.csv", "tune_a");
  cfg.federation.rounds = 10;
  cfg.jobs = 2;
  cfg.sync();
  cmd_tune(cfg);
  auto again = cfg;
  again.jobs = 1;
  again.sync();
  again.output_dir = fresh_dir("tune_b");
  cmd_tune(again);
  CHECK(lines(cfg.output_dir / "trials.csv").size() == 25);
  CHECK(slurp(cfg.output_dir / "trials.csv") == slurp(again.output_dir / "trials.csv"));
  CHECK(slurp(cfg.output_dir / "best.json") != "");
  std::filesystem::remove_all(cfg.output_dir);
  std::filesystem::remove_all(again.output_dir);
}

TEST_CASE("benchmark reports two models and one attribution per feature") {
  auto cfg = config_for(DatasetKind::Iris, "iris.csv", "bench_a");
  cmd_benchmark(cfg);
  const auto rows = lines(cfg.output_dir / "benchmark.csv");
  CHECK(rows[0] == "section,name,accuracy,auc,attribution");
  CHECK(count_prefix(rows, "model,") == 2);
  CHECK(count_prefix(rows, "attribution,") == 4);
  CHECK(rows.size() == 1 + 2 + 4);
  auto again = cfg;
  again.output_dir = fresh_dir("bench_b");
  cmd_benchmark(again);
  CHECK(slurp(cfg.output_dir / "benchmark.csv") == slurp(again.output_dir / "benchmark.csv"));
  std::filesystem::remove_all(cfg.output_dir);
  std::filesystem::remove_all(again.output_dir);
}

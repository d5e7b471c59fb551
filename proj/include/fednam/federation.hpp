#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <utility>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fednam/control.hpp"
#include "fednam/data.hpp"
#include "fednam/kernels.hpp"
#include "fednam/metrics.hpp"
#include "fednam/nn.hpp"
#include "fednam/rng.hpp"
#include "fednam/shape.hpp"

namespace fednam {

enum class Aggregation { WeightAverage, ShapeAverage, Both };
std::string_view to_string(Aggregation a);
Aggregation aggregation_from_string(std::string_view name);

struct FederationConfig {
  std::size_t num_clients = 3;
  std::size_t rounds = 50;
  std::size_t local_epochs = 5;
  Aggregation aggregation = Aggregation::Both;
  std::uint64_t seed = 0;
  bool stratified_partition = true;
  /// Clients trained concurrently within a round.
  int jobs = 1;

  void validate() const;
};

struct TrainingConfig {
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 1e-2;
  std::size_t batch_size = 32;
  bool early_stopping = true;
  EarlyStopConfig early_stop;
  bool lr_schedule = true;
  LrScheduleConfig schedule;

  void validate() const;
};

/// Label-stratified round-robin assignment: rows are shuffled within each class, classes
/// are laid end to end, and row i goes to client i mod num_clients. Shards are disjoint,
/// exhaustive, differ in size by at most one and in per-class count by at most one.
/// With `stratified` false the whole index set is shuffled instead. Shards are sorted.
std::vector<std::vector<std::size_t>> partition_clients(std::span<const int> labels, std::size_t num_clients,
                                                        std::uint64_t seed, bool stratified = true);

/// A client's private training rows and its held-out validation rows.
struct ClientData {
  Dataset train;
  Dataset val;
};

/// Partitions `train` across clients, then splits each shard into train/validation.
std::vector<ClientData> make_client_data(const Dataset& train, const FederationConfig& config,
                                         const SplitSpec& split);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based, counted over the client's whole life
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double learning_rate = 0.0;
};

template <class Model>
struct ClientState {
  std::size_t client_id = 0;
  ClientData data;
  Model model;
  OptimizerState optimizer;
  EarlyStopState<Model> early_stop;
  LrSchedule schedule;
  std::size_t epochs_done = 0;
  double last_train_loss = std::numeric_limits<double>::quiet_NaN();

  std::size_t n() const noexcept { return data.train.size(); }
  bool stopped() const noexcept { return early_stop.stopped(); }
};

template <class Model>
ClientState<Model> make_client(std::size_t client_id, ClientData data, const Model& initial,
                               const TrainingConfig& config) {
  if (data.train.size() == 0) throw DataError("client " + std::to_string(client_id) + " has no training rows");
  ClientState<Model> c;
  c.client_id = client_id;
  c.data = std::move(data);
  c.model = initial;
  c.optimizer.kind = config.optimizer;
  c.optimizer.learning_rate = config.learning_rate;
  c.early_stop = EarlyStopState<Model>(config.early_stop);
  c.schedule = LrSchedule(config.schedule);
  return c;
}

struct EvalResult {
  ClassificationMetrics metrics;
  std::vector<double> probabilities;
};

template <class Model>
EvalResult evaluate(const Model& model, const Dataset& data) {
  EvalResult r;
  const Matrix logits = kernels::predict_logits(model, data.X);
  r.probabilities = kernels::logits_to_probabilities(logits, ModelOps<Model>::task(model));
  r.metrics = compute_metrics(r.probabilities, data.y, ModelOps<Model>::task(model), data.num_classes);
  return r;
}

/// Mini-batch training of one client for up to `epochs` epochs. Batches are reshuffled
/// every epoch from derive_seed(seed, {client_id, epoch}). Early stopping and the
/// learning-rate schedule run on the client's validation loss (training loss if it has
/// no validation rows). A non-finite loss or gradient throws TrainingError.
template <class Model>
std::vector<EpochLog> local_train(ClientState<Model>& client, std::size_t epochs, const TrainingConfig& config,
                                  std::uint64_t seed) {
  std::vector<EpochLog> logs;
  if (client.n() == 0) throw TrainingError(client.client_id, "empty training shard");
  const std::size_t n = client.n();
  const std::size_t batch = std::max<std::size_t>(1, std::min(config.batch_size, n));
  kernels::BatchWorkspace<Model> ws;
  GradientsOf<Model> grads;
  std::vector<std::size_t> order(n);

  for (std::size_t e = 0; e < epochs && !client.stopped(); ++e) {
    const std::size_t epoch = client.epochs_done;
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, {client.client_id, epoch}));
    rng.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t start = 0, b = 0; start < n; start += batch, ++b) {
      const std::span<const std::size_t> rows(order.data() + start, std::min(batch, n - start));
      const double loss = kernels::batch_loss_grad(client.model, client.data.train, rows, Mode::Train,
                                                   derive_seed(seed, {client.client_id, epoch, b, 0xd209}), grads, ws);
      if (!std::isfinite(loss)) throw TrainingError(client.client_id, "non-finite training loss");
      try {
        const auto params = parameter_tensors(client.model);
        const auto g = parameter_tensors(std::as_const(grads));
        optimizer_step(client.optimizer, params, g);
      } catch (const NonFiniteError& err) {
        throw TrainingError(client.client_id, err.what());
      }
      loss_sum += loss * static_cast<double>(rows.size());
    }

    EpochLog log;
    log.epoch = ++client.epochs_done;
    log.train_loss = loss_sum / static_cast<double>(n);
    log.learning_rate = client.optimizer.learning_rate;
    if (client.data.val.size() > 0) {
      const auto ev = evaluate(client.model, client.data.val);
      log.val_loss = ev.metrics.log_loss;
      log.val_acc = ev.metrics.accuracy;
    } else {
      log.val_loss = log.train_loss;
      log.val_acc = std::numeric_limits<double>::quiet_NaN();
    }
    client.last_train_loss = log.train_loss;
    logs.push_back(log);

    if (config.early_stopping) {
      if (client.early_stop.update(log.val_loss, client.model) == StopDecision::Stop) {
        if (client.early_stop.failed()) throw TrainingError(client.client_id, "non-finite validation loss");
        if (client.early_stop.best()) client.model = *client.early_stop.best();
        break;
      }
    }
    if (config.lr_schedule) {
      client.optimizer.learning_rate = client.schedule.update(client.optimizer.learning_rate, log.val_loss);
    }
  }
  return logs;
}

/// Aggregation coefficients n_i / n.
std::vector<double> aggregation_weights(std::span<const std::size_t> sample_counts);

/// Sample-weighted parameter average of architecturally identical models.
template <class Model>
Model fed_avg_models(std::span<const Model* const> models, std::span<const std::size_t> sample_counts) {
  if (models.empty()) throw ShapeError("fed_avg: no client models");
  if (models.size() != sample_counts.size()) throw ShapeError("fed_avg: one sample count per model");
  for (const Model* m : models) {
    if (!same_architecture(*m, *models[0])) throw ShapeError("fed_avg: client architectures differ");
  }
  const auto coefs = aggregation_weights(sample_counts);
  std::vector<std::vector<std::span<const double>>> tensors;
  tensors.reserve(models.size());
  for (const Model* m : models) tensors.push_back(parameter_tensors(*m));
  Model global = *models[0];
  const auto out = parameter_tensors(global);
  kernels::weighted_average(tensors, coefs, out);
  return global;
}

template <class Model>
Model fed_avg(std::span<const ClientState<Model>> clients) {
  std::vector<const Model*> models;
  std::vector<std::size_t> counts;
  for (const auto& c : clients) {
    models.push_back(&c.model);
    counts.push_back(c.n());
  }
  return fed_avg_models<Model>(models, counts);
}

struct ClientRoundLog {
  std::size_t client_id = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  bool stopped = false;
};

struct RoundLog {
  std::size_t round = 0;  // 1-based
  std::vector<ClientRoundLog> clients;
  double global_val_loss = 0.0;
  double global_val_acc = 0.0;
  double global_val_auc = 0.0;
};

template <class Model>
struct FederationResult {
  Model global;
  std::vector<ClientState<Model>> clients;
  std::vector<RoundLog> rounds;
  bool failed = false;
  std::string error;
  std::size_t failed_client = 0;
};

/// Synchronous FedAvg: every round broadcasts the global model to each client that has
/// not early-stopped, trains it locally for `local_epochs`, and replaces the global model
/// by the sample-weighted parameter average. An early-stopped client keeps contributing
/// its best snapshot. On a client failure the run stops and the logs so far are returned.
template <class Model>
FederationResult<Model> run_federation(const Model& initial, std::vector<ClientData> client_data,
                                       const FederationConfig& config, const TrainingConfig& training) {
  config.validate();
  training.validate();
  if (client_data.size() != config.num_clients) throw ConfigError("run_federation: client data count != num_clients");

  FederationResult<Model> result;
  result.global = initial;
  for (std::size_t i = 0; i < client_data.size(); ++i) {
    result.clients.push_back(make_client(i, std::move(client_data[i]), initial, training));
  }
  std::vector<Dataset> val_parts;
  for (const auto& c : result.clients) val_parts.push_back(c.data.val);
  const Dataset global_val = Dataset::concat(val_parts);

  const auto n_clients = static_cast<std::ptrdiff_t>(result.clients.size());
  std::vector<std::exception_ptr> errors(result.clients.size());
  for (std::size_t round = 1; round <= config.rounds; ++round) {
#pragma omp parallel for schedule(dynamic) num_threads(std::max(config.jobs, 1)) if (config.jobs > 1)
    for (std::ptrdiff_t ci = 0; ci < n_clients; ++ci) {
      auto& client = result.clients[static_cast<std::size_t>(ci)];
      if (client.stopped()) continue;
      try {
        client.model = result.global;
        local_train(client, config.local_epochs, training, config.seed);
      } catch (...) {
        errors[static_cast<std::size_t>(ci)] = std::current_exception();
      }
    }
    for (std::size_t ci = 0; ci < errors.size(); ++ci) {
      if (!errors[ci]) continue;
      result.failed = true;
      result.failed_client = ci;
      try {
        std::rethrow_exception(errors[ci]);
      } catch (const std::exception& e) {
        result.error = e.what();
      }
      return result;
    }

    result.global = fed_avg<Model>(result.clients);

    RoundLog log;
    log.round = round;
    for (const auto& client : result.clients) {
      ClientRoundLog cl{client.client_id, client.last_train_loss, std::numeric_limits<double>::quiet_NaN(),
                        std::numeric_limits<double>::quiet_NaN(), client.stopped()};
      if (client.data.val.size() > 0) {
        const auto ev = evaluate(client.model, client.data.val);
        cl.val_loss = ev.metrics.log_loss;
        cl.val_acc = ev.metrics.accuracy;
      }
      log.clients.push_back(cl);
    }
    if (global_val.size() > 0) {
      const auto ev = evaluate(result.global, global_val);
      log.global_val_loss = ev.metrics.log_loss;
      log.global_val_acc = ev.metrics.accuracy;
      log.global_val_auc = ev.metrics.auc;
    } else {
      log.global_val_loss = log.global_val_acc = log.global_val_auc = std::numeric_limits<double>::quiet_NaN();
    }
    result.rounds.push_back(std::move(log));
  }
  return result;
}

/// Plain single-site training on `data` for `epochs` epochs, sharing every code path
/// (shuffling seeds, batching, early stopping) with a one-client federation.
template <class Model>
ClientState<Model> train_centralized(const Model& initial, ClientData data, std::size_t epochs,
                                     const TrainingConfig& training, std::uint64_t seed) {
  training.validate();
  auto client = make_client(0, std::move(data), initial, training);
  local_train(client, epochs, training, seed);
  return client;
}

/// Function-space aggregation: for every (feature, class), the pointwise mean over clients
/// of their effective shape curves on the shared grid.
std::vector<ShapeCurve> average_shape_functions(std::span<const NamModel* const> client_models,
                                                const FeatureGrid& grid, const std::string& owner = "global");

}  // namespace fednam

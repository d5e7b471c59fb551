#include "fednam/federation.hpp"

#include <algorithm>
#include <map>

namespace fednam {

std::string_view to_string(Aggregation a) {
  switch (a) {
    case Aggregation::WeightAverage: return "weight_average";
    case Aggregation::ShapeAverage: return "shape_average";
    case Aggregation::Both: return "both";
  }
  return "both";
}

Aggregation aggregation_from_string(std::string_view name) {
  if (name == "weight_average") return Aggregation::WeightAverage;
  if (name == "shape_average") return Aggregation::ShapeAverage;
  if (name == "both") return Aggregation::Both;
  throw ConfigError("unknown aggregation '" + std::string(name) + "'");
}

void FederationConfig::validate() const {
  if (num_clients < 1) throw ConfigError("federation.num_clients must be >= 1");
  if (rounds < 1) throw ConfigError("federation.rounds must be >= 1");
  if (local_epochs < 1) throw ConfigError("federation.local_epochs must be >= 1");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
}

void TrainingConfig::validate() const {
  if (!(std::isfinite(learning_rate) && learning_rate >= 0.0)) {
    throw ConfigError("optimizer.learning_rate must be finite and non-negative");
  }
  if (batch_size < 1) throw ConfigError("optimizer.batch_size must be >= 1");
  if (early_stop.patience < 1) throw ConfigError("training.patience must be >= 1");
  if (schedule.patience < 1) throw ConfigError("training.lr_patience must be >= 1");
  if (!(schedule.factor > 0.0 && schedule.factor < 1.0)) throw ConfigError("training.lr_factor must lie in (0,1)");
  if (!(schedule.min_lr >= 0.0)) throw ConfigError("training.min_lr must be >= 0");
}

std::vector<std::vector<std::size_t>> partition_clients(std::span<const int> labels, std::size_t num_clients,
                                                        std::uint64_t seed, bool stratified) {
  if (num_clients == 0) throw ConfigError("partition_clients: num_clients must be >= 1");
  if (labels.size() < num_clients) {
    throw DataError("partition_clients: " + std::to_string(labels.size()) + " rows cannot feed " +
                    std::to_string(num_clients) + " clients");
  }
  Rng rng(seed);
  std::vector<std::size_t> dealt;
  dealt.reserve(labels.size());
  if (stratified) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    for (auto& [label, members] : by_class) {
      rng.shuffle(members);
      dealt.insert(dealt.end(), members.begin(), members.end());
    }
  } else {
    for (std::size_t i = 0; i < labels.size(); ++i) dealt.push_back(i);
    rng.shuffle(dealt);
  }
  std::vector<std::vector<std::size_t>> shards(num_clients);
  for (std::size_t i = 0; i < dealt.size(); ++i) shards[i % num_clients].push_back(dealt[i]);
  for (auto& s : shards) std::sort(s.begin(), s.end());
  return shards;
}

std::vector<ClientData> make_client_data(const Dataset& train, const FederationConfig& config,
                                         const SplitSpec& split) {
  config.validate();
  split.validate();
  const auto shards =
      partition_clients(train.y, config.num_clients, derive_seed(config.seed, {0x9a27}), config.stratified_partition);
  std::vector<ClientData> out;
  out.reserve(shards.size());
  for (std::size_t c = 0; c < shards.size(); ++c) {
    const Dataset shard = train.subset(shards[c]);
    ClientData data;
    if (shard.size() < 2) {
      data.train = shard;
      data.val = shard.subset(std::span<const std::size_t>{});
    } else {
      const auto idx = train_test_split(shard.y, split.val_fraction, split.stratified,
                                        derive_seed(config.seed, {0x7a1, c}));
      data.train = shard.subset(idx.train);
      data.val = shard.subset(idx.test);
    }
    out.push_back(std::move(data));
  }
  return out;
}

std::vector<double> aggregation_weights(std::span<const std::size_t> sample_counts) {
  std::size_t total = 0;
  for (auto n : sample_counts) {
    if (n == 0) throw ShapeError("aggregation weights: every client needs n_i >= 1");
    total += n;
  }
  std::vector<double> w;
  w.reserve(sample_counts.size());
  for (auto n : sample_counts) w.push_back(static_cast<double>(n) / static_cast<double>(total));
  return w;
}

std::vector<ShapeCurve> average_shape_functions(std::span<const NamModel* const> client_models,
                                                const FeatureGrid& grid, const std::string& owner) {
  if (client_models.empty()) throw ShapeError("average_shape_functions: no client models");
  const NamModel& first = *client_models.front();
  if (grid.num_features() != first.num_features()) throw ShapeError("average_shape_functions: grid/model mismatch");
  for (const NamModel* m : client_models) {
    if (m->num_features() != first.num_features() || m->num_outputs() != first.num_outputs()) {
      throw ShapeError("average_shape_functions: client models disagree on features or classes");
    }
  }
  std::vector<ShapeCurve> out;
  for (std::size_t k = 0; k < first.num_features(); ++k) {
    for (std::size_t c = 0; c < first.num_outputs(); ++c) {
      std::vector<ShapeCurve> per_client;
      per_client.reserve(client_models.size());
      for (std::size_t i = 0; i < client_models.size(); ++i) {
        per_client.push_back(sample_shape_curve(*client_models[i], k, c, grid.points[k], "client"));
      }
      out.push_back(average_curves(per_client, owner));
    }
  }
  return out;
}

}  // namespace fednam

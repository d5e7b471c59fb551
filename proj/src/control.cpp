#include "fednam/control.hpp"

#include <algorithm>
#include <exception>

namespace fednam {

double LrSchedule::update(double learning_rate, double val_loss) {
  if (std::isfinite(val_loss) && best_loss_ - val_loss > config_.min_delta) {
    best_loss_ = val_loss;
    since_improvement_ = 0;
    return learning_rate;
  }
  ++since_improvement_;
  if (since_improvement_ < config_.patience) return learning_rate;
  since_improvement_ = 0;
  return std::min(learning_rate, std::max(learning_rate * config_.factor, config_.min_lr));
}

std::vector<HyperParams> HyperGrid::enumerate() const {
  std::vector<HyperParams> points;
  for (double d : dropout)
    for (double lr : learning_rate)
      for (std::size_t layers : hidden_layers)
        for (std::size_t batch : batch_size) points.push_back({d, lr, layers, batch});
  return points;
}

namespace {
double or_lowest(double v) { return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v; }
}  // namespace

bool better_trial(const TrialResult& a, const TrialResult& b) {
  if (a.failed != b.failed) return !a.failed;
  const double acc_a = or_lowest(a.mean_val_acc);
  const double acc_b = or_lowest(b.mean_val_acc);
  if (acc_a != acc_b) return acc_a > acc_b;
  const double auc_a = or_lowest(a.global_val_auc);
  const double auc_b = or_lowest(b.global_val_auc);
  if (auc_a != auc_b) return auc_a > auc_b;
  if (a.params.learning_rate != b.params.learning_rate) return a.params.learning_rate < b.params.learning_rate;
  if (a.params.dropout != b.params.dropout) return a.params.dropout < b.params.dropout;
  return a.trial_id < b.trial_id;
}

GridSearchResult grid_search(const HyperGrid& grid, const TrialRunner& run, int jobs) {
  const auto points = grid.enumerate();
  if (points.empty()) throw std::invalid_argument("grid_search: empty grid");
  GridSearchResult result;
  result.trials.resize(points.size());
  const auto n = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel for schedule(dynamic) num_threads(std::max(jobs, 1)) if (jobs > 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto id = static_cast<std::size_t>(i);
    TrialResult trial;
    try {
      trial = run(points[id], id);
    } catch (const std::exception& e) {
      trial.failed = true;
      trial.error = e.what();
    }
    trial.trial_id = id;
    trial.params = points[id];
    result.trials[id] = std::move(trial);
  }
  for (std::size_t i = 0; i < result.trials.size(); ++i) {
    if (result.trials[i].failed) continue;
    if (!result.best_index || better_trial(result.trials[i], result.trials[*result.best_index])) {
      result.best_index = i;
    }
  }
  return result;
}

}  // namespace fednam

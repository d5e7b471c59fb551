#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace fednam {

enum class StopDecision { Continue, Stop };

struct EarlyStopConfig {
  std::size_t patience = 20;
  double min_delta = 1e-4;
};

/// Patience-based early stopping on a validation loss, remembering the best snapshot.
///
/// An epoch improves iff best - loss > min_delta. The first finite loss always improves.
/// Stop is issued on the `patience`-th consecutive non-improving epoch; a NaN loss stops
/// immediately with `failed()` set.
template <class Snapshot>
class EarlyStopState {
 public:
  EarlyStopState() = default;
  explicit EarlyStopState(EarlyStopConfig config) : config_(config) {}

  StopDecision update(double val_loss, const Snapshot& current) {
    ++epoch_;
    if (!std::isfinite(val_loss)) {
      failed_ = true;
      stopped_ = true;
      return StopDecision::Stop;
    }
    if (best_loss_ - val_loss > config_.min_delta) {
      best_loss_ = val_loss;
      best_epoch_ = epoch_;
      best_ = current;
      since_improvement_ = 0;
      return StopDecision::Continue;
    }
    ++since_improvement_;
    if (since_improvement_ >= config_.patience) {
      stopped_ = true;
      return StopDecision::Stop;
    }
    return StopDecision::Continue;
  }

  double best_loss() const noexcept { return best_loss_; }
  /// 1-based epoch of the best snapshot (0 before any improvement).
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  std::size_t epochs_since_improvement() const noexcept { return since_improvement_; }
  std::size_t epochs_seen() const noexcept { return epoch_; }
  bool stopped() const noexcept { return stopped_; }
  bool failed() const noexcept { return failed_; }
  const std::optional<Snapshot>& best() const noexcept { return best_; }
  const EarlyStopConfig& config() const noexcept { return config_; }

 private:
  EarlyStopConfig config_;
  double best_loss_ = std::numeric_limits<double>::infinity();
  std::size_t best_epoch_ = 0;
  std::size_t since_improvement_ = 0;
  std::size_t epoch_ = 0;
  bool stopped_ = false;
  bool failed_ = false;
  std::optional<Snapshot> best_;
};

struct LrScheduleConfig {
  double factor = 0.5;
  std::size_t patience = 10;
  double min_lr = 1e-5;
  double min_delta = 1e-4;
};

/// Reduce-on-plateau: after `patience` consecutive non-improving epochs the rate is
/// multiplied by `factor` (never below `min_lr`) and the counter restarts.
class LrSchedule {
 public:
  LrSchedule() = default;
  explicit LrSchedule(LrScheduleConfig config) : config_(config) {}

  /// Returns the learning rate to use from the next epoch on.
  double update(double learning_rate, double val_loss);

  const LrScheduleConfig& config() const noexcept { return config_; }
  std::size_t epochs_since_improvement() const noexcept { return since_improvement_; }

 private:
  LrScheduleConfig config_;
  double best_loss_ = std::numeric_limits<double>::infinity();
  std::size_t since_improvement_ = 0;
};

struct HyperParams {
  double dropout = 0.0;
  double learning_rate = 1e-2;
  std::size_t hidden_layers = 3;
  std::size_t batch_size = 32;

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

struct HyperGrid {
  std::vector<double> dropout{0.0, 0.1, 0.3};
  std::vector<double> learning_rate{1e-2, 1e-3};
  std::vector<std::size_t> hidden_layers{2, 3};
  std::vector<std::size_t> batch_size{16, 32};

  /// Cartesian product in (dropout, learning_rate, hidden_layers, batch_size) nesting order.
  std::vector<HyperParams> enumerate() const;
};

struct TrialResult {
  std::size_t trial_id = 0;
  HyperParams params;
  std::vector<double> client_val_acc;
  double mean_val_acc = 0.0;
  double global_val_auc = 0.0;
  double global_test_acc = 0.0;
  double global_test_auc = 0.0;
  bool failed = false;
  std::string error;
};

/// Runs one trial; exceptions are caught by grid_search and recorded as a failed trial.
using TrialRunner = std::function<TrialResult(const HyperParams&, std::size_t trial_id)>;

struct GridSearchResult {
  std::vector<TrialResult> trials;  // in enumeration order
  std::optional<std::size_t> best_index;

  const HyperParams& best() const { return trials.at(best_index.value()).params; }
};

/// True if `a` should be preferred over `b`: higher mean validation accuracy, then higher
/// global validation AUC, then lower learning rate, then lower dropout, then lower trial id.
bool better_trial(const TrialResult& a, const TrialResult& b);

/// Exhaustive search. `jobs` > 1 runs trials concurrently; results are identical either way.
GridSearchResult grid_search(const HyperGrid& grid, const TrialRunner& run, int jobs = 1);

}  // namespace fednam

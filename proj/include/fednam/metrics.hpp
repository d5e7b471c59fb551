#pragma once

#include <span>
#include <vector>

#include "fednam/nn.hpp"

namespace fednam {

/// ROC-AUC of `scores` for binary `labels` (1 = positive) via the rank-sum
/// (Mann-Whitney U) statistic with average ranks for ties. NaN (plus a warning)
/// when only one class is present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct ClassificationMetrics {
  double accuracy = 0.0;
  double auc = 0.0;  // one-vs-rest macro average for multiclass
  double log_loss = 0.0;
};

/// `probabilities` holds one value per row (Binary: P(y=1)) or num_classes values per
/// row, row-major (Multiclass). Binary accuracy uses `threshold`; multiclass uses argmax.
ClassificationMetrics compute_metrics(std::span<const double> probabilities, std::span<const int> labels, Task task,
                                      std::size_t num_classes, double threshold = 0.5);

}  // namespace fednam

#include "fednam/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fednam/data.hpp"

namespace fednam {

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("roc_auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of (1-based, tie-averaged) ranks of positives, kept doubled to stay integral.
  long double doubled_rank_sum = 0;
  std::size_t n_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const std::size_t doubled_rank = (i + 1) + (j + 1);
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) {
        doubled_rank_sum += static_cast<long double>(doubled_rank);
        ++n_pos;
      }
    }
    i = j + 1;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    warn("ROC-AUC undefined: only one class present");
    return std::numeric_limits<double>::quiet_NaN();
  }
  const long double u = doubled_rank_sum / 2 - static_cast<long double>(n_pos) * (n_pos + 1) / 2;
  // u and the pair count are exact in double, so one correctly rounded division remains.
  return static_cast<double>(u) / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

ClassificationMetrics compute_metrics(std::span<const double> probabilities, std::span<const int> labels, Task task,
                                      std::size_t num_classes, double threshold) {
  ClassificationMetrics m;
  const std::size_t n = labels.size();
  if (n == 0) throw ShapeError("compute_metrics: no rows");
  constexpr double kProbFloor = 1e-15;
  if (task == Task::Binary) {
    if (probabilities.size() != n) throw ShapeError("compute_metrics: one probability per row expected");
    std::size_t correct = 0;
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const int pred = probabilities[i] >= threshold ? 1 : 0;
      correct += pred == labels[i];
      const double p = labels[i] == 1 ? probabilities[i] : 1.0 - probabilities[i];
      loss -= std::log(std::max(p, kProbFloor));
    }
    m.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    m.log_loss = loss / static_cast<double>(n);
    m.auc = roc_auc(probabilities, labels);
    return m;
  }

  if (probabilities.size() != n * num_classes) throw ShapeError("compute_metrics: num_classes probabilities per row");
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = probabilities.subspan(i * num_classes, num_classes);
    const auto pred = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    correct += pred == labels[i];
    loss -= std::log(std::max(row[static_cast<std::size_t>(labels[i])], kProbFloor));
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  m.log_loss = loss / static_cast<double>(n);

  double auc_sum = 0.0;
  std::size_t defined = 0;
  std::vector<double> scores(n);
  std::vector<int> one_vs_rest(n);
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = probabilities[i * num_classes + c];
      one_vs_rest[i] = labels[i] == static_cast<int>(c) ? 1 : 0;
    }
    const double auc = roc_auc(scores, one_vs_rest);
    if (!std::isnan(auc)) {
      auc_sum += auc;
      ++defined;
    }
  }
  m.auc = defined == 0 ? std::numeric_limits<double>::quiet_NaN() : auc_sum / static_cast<double>(defined);
  return m;
}

}  // namespace fednam

#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <vector>

#include "augraph/common.hpp"

namespace augraph {
namespace metrics {

inline double accuracy(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  if (y_true.size() != y_pred.size()) fail_runtime("accuracy: size mismatch");
  if (y_true.empty()) fail_runtime("accuracy: empty input");
  size_t hit = 0;
  for (size_t i = 0; i < y_true.size(); ++i)
    if (y_true[i] == y_pred[i]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(y_true.size());
}

// One-vs-rest F1 for a single positive class; 0 when precision+recall is 0.
inline double f1_for_class(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                           int positive) {
  size_t tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < y_true.size(); ++i) {
    bool t = y_true[i] == positive;
    bool p = y_pred[i] == positive;
    if (t && p) ++tp;
    else if (!t && p) ++fp;
    else if (t && !p) ++fn;
  }
  double denom = static_cast<double>(2 * tp + fp + fn);
  if (denom == 0.0) return 0.0;
  return 2.0 * static_cast<double>(tp) / denom;
}

// Binary tasks report positive-class F1 where the positive class is index 1
// of the sorted class list; multiclass tasks report the unweighted mean of
// per-class F1.
inline double f1_score(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                       int n_classes) {
  if (y_true.size() != y_pred.size()) fail_runtime("f1: size mismatch");
  if (y_true.empty()) fail_runtime("f1: empty input");
  if (n_classes < 2) fail_runtime("f1: need at least two classes");
  if (n_classes == 2) return f1_for_class(y_true, y_pred, 1);
  double sum = 0.0;
  for (int c = 0; c < n_classes; ++c) sum += f1_for_class(y_true, y_pred, c);
  return sum / static_cast<double>(n_classes);
}

// Mann-Whitney rank form with midranks for tied scores: the probability that
// a random positive outranks a random negative, ties counting half. Empty
// when only one class is present.
inline std::optional<double> roc_auc(const std::vector<int>& y_true,
                                     const std::vector<double>& scores) {
  if (y_true.size() != scores.size()) fail_runtime("roc_auc: size mismatch");
  size_t n = y_true.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    return a < b;
  });

  std::vector<double> rank(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }

  size_t n_pos = 0;
  double rank_sum = 0.0;
  for (size_t k = 0; k < n; ++k)
    if (y_true[k] == 1) {
      ++n_pos;
      rank_sum += rank[k];
    }
  size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  double u = rank_sum - static_cast<double>(n_pos) * static_cast<double>(n_pos + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace metrics
}  // namespace augraph

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtac/error.hpp"

namespace vtac::eval {

/// Area under the ROC curve from the Mann-Whitney rank-sum with mid-ranks for
/// ties. Ranks are kept doubled so the whole computation stays in integers
/// until the final division: AUC = (sum 2r_pos - n+(n+ + 1)) / (2 n+ n-).
/// Label 1 is the positive class.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) fail(ErrorCode::LengthMismatch, "scores and labels differ in length");
  const std::size_t n = scores.size();
  std::uint64_t n_pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1) fail(ErrorCode::LabelOutOfRange, "labels must be 0 or 1");
    if (!std::isfinite(scores[i])) fail(ErrorCode::ScoreOutOfRange, "scores must be finite");
    n_pos += static_cast<std::uint64_t>(labels[i]);
  }
  const std::uint64_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) fail(ErrorCode::SingleClass, "ROC-AUC needs both classes");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  std::uint64_t twice_rank_sum = 0;
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo + 1;
    while (hi < n && scores[order[hi]] == scores[order[lo]]) ++hi;
    // 1-based ranks lo+1 .. hi share the mid-rank (lo + 1 + hi) / 2.
    const std::uint64_t twice_mid = lo + 1 + hi;
    for (std::size_t i = lo; i < hi; ++i) {
      if (labels[order[i]] == 1) twice_rank_sum += twice_mid;
    }
    lo = hi;
  }
  const std::uint64_t twice_u = twice_rank_sum - n_pos * (n_pos + 1);
  return static_cast<double>(twice_u) / static_cast<double>(2 * n_pos * n_neg);
}

struct ConfusionMatrix {
  std::uint64_t tp = 0;  // true alarm predicted true
  std::uint64_t fn = 0;  // true alarm predicted false
  std::uint64_t fp = 0;  // false alarm predicted true
  std::uint64_t tn = 0;  // false alarm predicted false

  std::uint64_t total() const { return tp + fn + fp + tn; }
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_defined = true;  // false when nothing was predicted as this class
  std::uint64_t support = 0;
};

struct EvalReport {
  double roc_auc = 0.0;
  double threshold = 0.5;
  std::size_t n_samples = 0;
  ConfusionMatrix confusion;
  ClassMetrics true_alarm;
  ClassMetrics false_alarm;
};

namespace detail {

inline ClassMetrics class_metrics(std::uint64_t hit, std::uint64_t missed, std::uint64_t wrongly_claimed) {
  ClassMetrics m;
  m.support = hit + missed;
  const std::uint64_t predicted = hit + wrongly_claimed;
  m.precision_defined = predicted > 0;
  m.precision = predicted > 0 ? static_cast<double>(hit) / static_cast<double>(predicted) : 0.0;
  m.recall = m.support > 0 ? static_cast<double>(hit) / static_cast<double>(m.support) : 0.0;
  m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

}  // namespace detail

inline ConfusionMatrix confusion_matrix(std::span<const double> scores, std::span<const int> labels, double threshold) {
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool alert = scores[i] >= threshold;
    if (labels[i] == 1) {
      (alert ? cm.tp : cm.fn)++;
    } else {
      (alert ? cm.fp : cm.tn)++;
    }
  }
  return cm;
}

/// Metrics for both classes from a confusion matrix. The false-alarm class
/// is scored by swapping roles: its "hits" are true negatives.
inline void fill_class_metrics(EvalReport& r) {
  const auto& cm = r.confusion;
  r.true_alarm = detail::class_metrics(cm.tp, cm.fn, cm.fp);
  r.false_alarm = detail::class_metrics(cm.tn, cm.fp, cm.fn);
}

inline EvalReport classification_metrics(std::span<const double> scores, std::span<const int> labels,
                                         double threshold = 0.5) {
  EvalReport r;
  r.roc_auc = roc_auc(scores, labels);
  r.threshold = threshold;
  r.n_samples = scores.size();
  r.confusion = confusion_matrix(scores, labels, threshold);
  fill_class_metrics(r);
  return r;
}

struct AlertDecision {
  double score = 0.0;
  bool alert = false;
  double threshold = 0.5;
};

/// Alert iff score >= threshold; a score exactly at the threshold alerts.
inline AlertDecision decide_alert(double score, double threshold = 0.5) {
  if (!(score >= 0.0 && score <= 1.0)) fail(ErrorCode::ScoreOutOfRange, "alert score must lie in [0, 1]");
  return {score, score >= threshold, threshold};
}

inline nlohmann::ordered_json to_json(const ClassMetrics& m) {
  return {{"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"precision_defined", m.precision_defined},
          {"support", m.support}};
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["roc_auc"] = r.roc_auc;
  j["threshold"] = r.threshold;
  j["n_samples"] = r.n_samples;
  j["confusion_matrix"] = {{"tp", r.confusion.tp}, {"fn", r.confusion.fn}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn}};
  j["true_alarm"] = to_json(r.true_alarm);
  j["false_alarm"] = to_json(r.false_alarm);
  return j;
}

}  // namespace vtac::eval

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "vtac/error.hpp"

namespace vtac::nn {

/// Logistic function in the branch form that never overflows exp().
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline constexpr double kProbabilityClamp = 1e-7;

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d logit, one per sample
};

/// Weighted binary cross-entropy on logits:
///   L = -(1 / sum w) sum w_i [y_i log p_i + (1 - y_i) log(1 - p_i)],
/// p = sigmoid(z) clamped to [1e-7, 1 - 1e-7] inside the logs. The gradient
/// is w_i (p_i - y_i) / sum w. Empty `weights` means all ones.
inline LossResult weighted_bce(std::span<const double> logits, std::span<const int> labels,
                               std::span<const double> weights = {}) {
  if (logits.size() != labels.size() || (!weights.empty() && weights.size() != labels.size())) {
    fail(ErrorCode::ShapeMismatch, "logits, labels and weights must have equal length");
  }
  LossResult r;
  r.grad.resize(logits.size());
  double total_w = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) fail(ErrorCode::LabelOutOfRange, "labels must be 0 or 1");
    total_w += weights.empty() ? 1.0 : weights[i];
  }
  if (!(total_w > 0.0)) fail(ErrorCode::InvalidConfig, "sample weights must sum to a positive value");
  double acc = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    const double p = sigmoid(logits[i]);
    const double pc = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
    acc -= w * (labels[i] == 1 ? std::log(pc) : std::log(1.0 - pc));
    r.grad[i] = w * (p - labels[i]) / total_w;
  }
  r.loss = acc / total_w;
  return r;
}

}  // namespace vtac::nn

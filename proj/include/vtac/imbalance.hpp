#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vtac/error.hpp"
#include "vtac/matrix.hpp"
#include "vtac/preprocess.hpp"
#include "vtac/rng.hpp"

namespace vtac::imbalance {

enum class Method { None, Smote, Adasyn };

struct ResampleConfig {
  Method method = Method::None;
  double ratio = 1.0;  // desired n_minority / n_majority after resampling
  std::size_t k_neighbors = 5;
  std::uint64_t seed = 0;
};

inline void validate(const ResampleConfig& c) {
  if (!(c.ratio > 0.0 && c.ratio <= 1.0)) fail(ErrorCode::InvalidConfig, "resample ratio must lie in (0, 1]");
  if (c.k_neighbors < 1) fail(ErrorCode::InvalidConfig, "k_neighbors must be at least 1");
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    d += t * t;
  }
  return d;
}

/// Exact k nearest neighbours of row `query` by Euclidean distance, nearest
/// first. Ties break toward the lower row index. `candidates`, when given,
/// restricts the search to those rows; the query itself is never returned.
inline std::vector<std::size_t> k_nearest(const Matrix& points, std::size_t query, std::size_t k,
                                          std::optional<std::span<const std::size_t>> candidates = std::nullopt) {
  std::vector<std::pair<double, std::size_t>> dist;
  const auto q = points.row(query);
  auto consider = [&](std::size_t i) {
    if (i != query) dist.emplace_back(squared_distance(q, points.row(i)), i);
  };
  if (candidates) {
    for (auto i : *candidates) consider(i);
  } else {
    for (std::size_t i = 0; i < points.rows; ++i) consider(i);
  }
  if (k > dist.size()) {
    fail(ErrorCode::NotEnoughNeighbors, "asked for " + std::to_string(k) + " neighbours among " +
                                            std::to_string(dist.size()) + " candidates");
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = dist[i].second;
  return out;
}

/// Where a synthetic row came from: z = x[seed_row] + gap * (x[neighbor_row] - x[seed_row]).
struct SyntheticOrigin {
  std::size_t seed_row = 0;
  std::size_t neighbor_row = 0;
  double gap = 0.0;
};

struct ResampleResult {
  Matrix features;
  std::vector<int> labels;
  std::vector<SyntheticOrigin> provenance;  // one entry per appended row
  std::size_t n_original = 0;
};

struct ClassCounts {
  int minority_label = 1;
  int majority_label = 0;
  std::vector<std::size_t> minority_rows;
  std::size_t n_majority = 0;
};

inline ClassCounts count_classes(std::span<const int> labels) {
  std::size_t n1 = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) fail(ErrorCode::LabelOutOfRange, "labels must be 0 or 1");
    n1 += static_cast<std::size_t>(y);
  }
  const std::size_t n0 = labels.size() - n1;
  ClassCounts c;
  // Equal counts: treat label 1 (true alarm) as the minority.
  c.minority_label = n1 <= n0 ? 1 : 0;
  c.majority_label = 1 - c.minority_label;
  c.n_majority = std::max(n0, n1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == c.minority_label) c.minority_rows.push_back(i);
  }
  return c;
}

/// Number of synthetic rows needed to reach round(ratio * n_majority) minority rows.
inline std::size_t synthetic_count(std::size_t n_minority, std::size_t n_majority, double ratio) {
  const auto target = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n_majority)));
  return target > n_minority ? target - n_minority : 0;
}

namespace detail {

inline ResampleResult start_result(const Matrix& features, std::span<const int> labels, std::size_t n_new) {
  if (features.rows != labels.size()) fail(ErrorCode::DimensionMismatch, "feature rows and labels differ in count");
  ResampleResult r;
  r.n_original = features.rows;
  r.features = Matrix(features.rows + n_new, features.cols);
  std::copy(features.data.begin(), features.data.end(), r.features.data.begin());
  r.labels.assign(labels.begin(), labels.end());
  r.labels.reserve(features.rows + n_new);
  r.provenance.reserve(n_new);
  return r;
}

inline void emit(ResampleResult& r, const Matrix& features, std::size_t seed_row, std::size_t neighbor_row, double gap,
                 int label) {
  const auto x = features.row(seed_row);
  const auto y = features.row(neighbor_row);
  auto z = r.features.row(r.n_original + r.provenance.size());
  for (std::size_t j = 0; j < z.size(); ++j) z[j] = x[j] + gap * (y[j] - x[j]);
  r.labels.push_back(label);
  r.provenance.push_back({seed_row, neighbor_row, gap});
}

/// For every minority row, its k nearest minority neighbours.
inline std::vector<std::vector<std::size_t>> minority_neighbours(const Matrix& features,
                                                                 const std::vector<std::size_t>& minority,
                                                                 std::size_t k) {
  std::vector<std::vector<std::size_t>> nn;
  nn.reserve(minority.size());
  for (auto i : minority) nn.push_back(k_nearest(features, i, k, std::span<const std::size_t>(minority)));
  return nn;
}

}  // namespace detail

/// Synthetic minority oversampling. Original rows are kept in place and
/// synthetic rows appended. Each synthetic row draws, in order: a minority
/// seed row, one of its k minority neighbours, and a gap in [0, 1).
inline ResampleResult smote(const Matrix& features, std::span<const int> labels, const ResampleConfig& config) {
  validate(config);
  const auto classes = count_classes(labels);
  const auto& minority = classes.minority_rows;
  if (minority.size() < 2) fail(ErrorCode::MinorityTooSmall, "SMOTE needs at least 2 minority samples");
  const std::size_t n_new = synthetic_count(minority.size(), classes.n_majority, config.ratio);
  auto result = detail::start_result(features, labels, n_new);
  if (n_new == 0) return result;

  const std::size_t k = std::min(config.k_neighbors, minority.size() - 1);
  const auto nn = detail::minority_neighbours(features, minority, k);
  Rng rng(config.seed);
  for (std::size_t s = 0; s < n_new; ++s) {
    const std::size_t m = rng.index(minority.size());
    const std::size_t neighbor = nn[m][rng.index(k)];
    const double gap = rng.uniform();
    detail::emit(result, features, minority[m], neighbor, gap, classes.minority_label);
  }
  return result;
}

/// Integer allocation of `total` proportional to `weights`, summing exactly to
/// `total` (largest remainder, ties to the lower index).
inline std::vector<std::size_t> allocate(std::span<const double> weights, std::size_t total) {
  return preprocess::detail::largest_remainder(weights, total);
}

/// Adaptive synthetic sampling. Each minority row i gets a share of the
/// synthetic rows proportional to r_i, the fraction of majority rows among its
/// k nearest neighbours over the whole data set. With every r_i = 0 the
/// allocation falls back to uniform.
inline ResampleResult adasyn(const Matrix& features, std::span<const int> labels, const ResampleConfig& config) {
  validate(config);
  const auto classes = count_classes(labels);
  const auto& minority = classes.minority_rows;
  if (minority.size() < 2) fail(ErrorCode::MinorityTooSmall, "ADASYN needs at least 2 minority samples");
  const std::size_t n_new = synthetic_count(minority.size(), classes.n_majority, config.ratio);
  auto result = detail::start_result(features, labels, n_new);
  if (n_new == 0) return result;

  const std::size_t k_all = std::min(config.k_neighbors, features.rows - 1);
  std::vector<double> hardness(minority.size(), 0.0);
  double total = 0.0;
  for (std::size_t m = 0; m < minority.size(); ++m) {
    const auto nn = k_nearest(features, minority[m], k_all);
    std::size_t majority = 0;
    for (auto j : nn) majority += labels[j] == classes.majority_label ? 1 : 0;
    hardness[m] = static_cast<double>(majority) / static_cast<double>(k_all);
    total += hardness[m];
  }
  if (total == 0.0) std::fill(hardness.begin(), hardness.end(), 1.0);
  const auto per_row = allocate(hardness, n_new);

  const std::size_t k = std::min(config.k_neighbors, minority.size() - 1);
  const auto nn = detail::minority_neighbours(features, minority, k);
  Rng rng(config.seed);
  for (std::size_t m = 0; m < minority.size(); ++m) {
    for (std::size_t s = 0; s < per_row[m]; ++s) {
      const std::size_t neighbor = nn[m][rng.index(k)];
      const double gap = rng.uniform();
      detail::emit(result, features, minority[m], neighbor, gap, classes.minority_label);
    }
  }
  return result;
}

inline ResampleResult resample(const Matrix& features, std::span<const int> labels, const ResampleConfig& config) {
  switch (config.method) {
    case Method::Smote: return smote(features, labels, config);
    case Method::Adasyn: return adasyn(features, labels, config);
    case Method::None: break;
  }
  return detail::start_result(features, labels, 0);
}

struct ClassWeights {
  double weight_true = 1.0;
  double weight_false = 1.0;

  double operator()(int label) const { return label == 1 ? weight_true : weight_false; }
};

/// Balanced weights w_c = N / (2 N_c), so the weights sum to N over the samples.
inline ClassWeights class_weights(std::span<const int> labels) {
  std::size_t n_true = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) fail(ErrorCode::LabelOutOfRange, "labels must be 0 or 1");
    n_true += static_cast<std::size_t>(y);
  }
  const std::size_t n = labels.size();
  const std::size_t n_false = n - n_true;
  if (n_true == 0 || n_false == 0) fail(ErrorCode::SingleClass, "class weights need both classes present");
  const auto nd = static_cast<double>(n);
  return {nd / (2.0 * static_cast<double>(n_true)), nd / (2.0 * static_cast<double>(n_false))};
}

inline const char* to_string(Method m) {
  switch (m) {
    case Method::Smote: return "smote";
    case Method::Adasyn: return "adasyn";
    case Method::None: break;
  }
  return "none";
}

inline Method parse_method(std::string_view s) {
  if (s == "smote") return Method::Smote;
  if (s == "adasyn") return Method::Adasyn;
  if (s == "none") return Method::None;
  fail(ErrorCode::ConfigError, "resample method must be smote, adasyn or none");
}

}  // namespace vtac::imbalance

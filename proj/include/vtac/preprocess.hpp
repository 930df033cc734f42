#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vtac/error.hpp"
#include "vtac/matrix.hpp"
#include "vtac/rng.hpp"
#include "vtac/text.hpp"
#include "vtac/wfdb.hpp"

namespace vtac::preprocess {

/// Replace every masked sample with its channel's mean over the unmasked
/// samples of the window. A channel with nothing observed is filled with 0.
inline wfdb::AlarmWindow impute_mean(wfdb::AlarmWindow window) {
  const std::size_t t_len = window.samples.rows;
  const std::size_t n_ch = window.samples.cols;
  if (window.missing_mask.empty()) return window;
  for (std::size_t c = 0; c < n_ch; ++c) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < t_len; ++t) {
      if (!window.missing_mask[t * n_ch + c]) {
        sum += window.samples(t, c);
        ++count;
      }
    }
    const double fill = count > 0 ? sum / static_cast<double>(count) : 0.0;
    for (std::size_t t = 0; t < t_len; ++t) {
      if (window.missing_mask[t * n_ch + c]) window.samples(t, c) = fill;
    }
  }
  std::fill(window.missing_mask.begin(), window.missing_mask.end(), std::uint8_t{0});
  return window;
}

struct ScalerParams {
  std::vector<double> min;
  std::vector<double> max;

  std::size_t dim() const { return min.size(); }
  bool operator==(const ScalerParams&) const = default;
};

/// Column-wise extremes. Pass the training rows only.
inline ScalerParams fit_scaler(const Matrix& features) {
  if (features.rows == 0) fail(ErrorCode::EmptyInput, "cannot fit a scaler on zero rows");
  ScalerParams p;
  auto first = features.row(0);
  p.min.assign(first.begin(), first.end());
  p.max.assign(first.begin(), first.end());
  for (std::size_t r = 1; r < features.rows; ++r) {
    auto row = features.row(r);
    for (std::size_t c = 0; c < features.cols; ++c) {
      p.min[c] = std::min(p.min[c], row[c]);
      p.max[c] = std::max(p.max[c], row[c]);
    }
  }
  return p;
}

inline ScalerParams fit_scaler(const Matrix& features, std::span<const std::size_t> train_rows) {
  return fit_scaler(select_rows(features, train_rows));
}

/// (x - min) / (max - min), clamped to [0, 1]. Constant columns map to 0.
inline Matrix apply_scaler(const Matrix& features, const ScalerParams& params) {
  if (features.cols != params.dim()) {
    fail(ErrorCode::DimensionMismatch, "scaler fitted on " + std::to_string(params.dim()) + " features, got " +
                                           std::to_string(features.cols));
  }
  Matrix out(features.rows, features.cols);
  for (std::size_t r = 0; r < features.rows; ++r) {
    for (std::size_t c = 0; c < features.cols; ++c) {
      const double range = params.max[c] - params.min[c];
      double v = range > 0.0 ? (features(r, c) - params.min[c]) / range : 0.0;
      out(r, c) = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

inline std::string format_scaler(const ScalerParams& p) {
  std::string out = "vtac-scaler 1\n";
  out += "dim " + std::to_string(p.dim()) + '\n';
  out += "min";
  for (double v : p.min) out += ' ' + text::format_double(v);
  out += "\nmax";
  for (double v : p.max) out += ' ' + text::format_double(v);
  out += '\n';
  return out;
}

inline ScalerParams parse_scaler(std::string_view s) {
  ScalerParams p;
  std::size_t dim = 0;
  bool versioned = false;
  for (auto raw : text::lines(s)) {
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto tok = text::split_whitespace(line);
    if (tok[0] == "vtac-scaler") {
      if (tok.size() != 2 || tok[1] != "1") fail(ErrorCode::VersionMismatch, "unsupported scaler file version");
      versioned = true;
    } else if (tok[0] == "dim" && tok.size() == 2) {
      dim = text::parse_number<std::size_t>(tok[1]).value_or(0);
    } else if (tok[0] == "min" || tok[0] == "max") {
      auto& dst = tok[0] == "min" ? p.min : p.max;
      for (std::size_t i = 1; i < tok.size(); ++i) {
        auto v = text::parse_number<double>(tok[i]);
        if (!v) fail(ErrorCode::MalformedCsv, "non-numeric scaler value");
        dst.push_back(*v);
      }
    } else {
      fail(ErrorCode::MalformedCsv, "unknown scaler key '" + std::string(tok[0]) + "'");
    }
  }
  if (!versioned || p.min.size() != dim || p.max.size() != dim) {
    fail(ErrorCode::MalformedCsv, "scaler file incomplete");
  }
  return p;
}

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
};

namespace detail {

/// Split `total` units across buckets proportionally to `weights` using the
/// largest-remainder rule; ties go to the lower bucket index.
inline std::vector<std::size_t> largest_remainder(std::span<const double> weights, std::size_t total) {
  std::vector<std::size_t> out(weights.size(), 0);
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (weights.empty() || total == 0) return out;
  std::vector<double> remainder(weights.size(), 0.0);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = sum > 0.0 ? static_cast<double>(total) * weights[i] / sum : 0.0;
    out[i] = static_cast<std::size_t>(std::floor(exact));
    remainder[i] = exact - static_cast<double>(out[i]);
    assigned += out[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size()) {
    ++out[order[k]];
    ++assigned;
  }
  // Floating error could overshoot by one in pathological cases.
  while (assigned > total) {
    auto it = std::max_element(out.begin(), out.end());
    --*it;
    --assigned;
  }
  return out;
}

}  // namespace detail

/// Seeded, label-stratified 80/10/10 split. Validation and test each get
/// floor(0.1 * n) rows, allocated across classes by largest remainder; the
/// rest is training. Within each class the order comes from a seeded
/// Fisher-Yates shuffle (see Rng). Index lists are returned sorted.
inline DatasetSplit split_dataset(std::span<const int> labels, std::uint64_t seed) {
  const std::size_t n = labels.size();
  if (n < 10) fail(ErrorCode::TooFewSamples, "need at least 10 samples to split, got " + std::to_string(n));

  std::vector<int> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  std::vector<std::vector<std::size_t>> members(classes.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), labels[i]) - classes.begin());
    members[k].push_back(i);
  }
  std::vector<double> sizes;
  for (const auto& m : members) sizes.push_back(static_cast<double>(m.size()));

  const std::size_t n_holdout = n / 10;
  const auto val_alloc = detail::largest_remainder(sizes, n_holdout);
  const auto test_alloc = detail::largest_remainder(sizes, n_holdout);

  DatasetSplit split;
  split.seed = seed;
  Rng rng(seed);
  for (std::size_t k = 0; k < members.size(); ++k) {
    auto& m = members[k];
    rng.shuffle(std::span<std::size_t>(m));
    const std::size_t n_val = std::min(val_alloc[k], m.size());
    const std::size_t n_test = std::min(test_alloc[k], m.size() - n_val);
    split.val.insert(split.val.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(n_val));
    split.test.insert(split.test.end(), m.begin() + static_cast<std::ptrdiff_t>(n_val),
                      m.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
    split.train.insert(split.train.end(), m.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), m.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

/// Unlabelled variant: every row counts as one class.
inline DatasetSplit split_dataset(std::size_t n, std::uint64_t seed) {
  std::vector<int> labels(n, 0);
  return split_dataset(labels, seed);
}

/// Split file: `record_id,split` rows with split in {train,val,test}. Used to
/// honour an externally defined benchmark split.
inline std::string format_split(const DatasetSplit& split, const std::vector<std::string>& record_ids,
                                std::string_view comment = {}) {
  std::vector<std::string_view> tag(record_ids.size(), "");
  for (auto i : split.train) tag[i] = "train";
  for (auto i : split.val) tag[i] = "val";
  for (auto i : split.test) tag[i] = "test";
  std::string out;
  if (!comment.empty()) out += "# " + std::string(comment) + '\n';
  out += "record_id,split\n";
  for (std::size_t i = 0; i < record_ids.size(); ++i) out += record_ids[i] + ',' + std::string(tag[i]) + '\n';
  return out;
}

inline DatasetSplit parse_split(std::string_view csv, const std::vector<std::string>& record_ids) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < record_ids.size(); ++i) index.emplace(record_ids[i], i);
  DatasetSplit split;
  std::vector<std::uint8_t> seen(record_ids.size(), 0);
  for (auto raw : text::lines(csv)) {
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto f = text::split(line, ',');
    if (f.size() != 2) fail(ErrorCode::MalformedCsv, "split line '" + std::string(line) + "'");
    const auto id = std::string(text::trim(f[0]));
    const auto which = text::trim(f[1]);
    if (id == "record_id") continue;
    auto it = index.find(id);
    if (it == index.end()) continue;  // split files may list events not present locally
    if (seen[it->second]++) fail(ErrorCode::MalformedCsv, "record '" + id + "' listed twice in split file");
    if (which == "train") {
      split.train.push_back(it->second);
    } else if (which == "val") {
      split.val.push_back(it->second);
    } else if (which == "test") {
      split.test.push_back(it->second);
    } else {
      fail(ErrorCode::MalformedCsv, "unknown split '" + std::string(which) + "'");
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) fail(ErrorCode::MissingInput, "record '" + record_ids[i] + "' missing from split file");
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

}  // namespace vtac::preprocess

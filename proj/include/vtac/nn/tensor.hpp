#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "vtac/error.hpp"

namespace vtac::nn {

/// Row-major dense array. Rank 2 is batch x features, rank 3 is
/// batch x time x channels.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s, double fill = 0.0)
      : shape(std::move(s)), data(std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>()), fill) {}
  Tensor(std::vector<std::size_t> s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>())) {
      fail(ErrorCode::ShapeMismatch, "tensor data does not match its shape");
    }
  }

  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape[i]; }
  std::size_t size() const { return data.size(); }

  /// Elements per batch item.
  std::size_t item_size() const { return shape.empty() ? 0 : data.size() / shape[0]; }

  std::span<double> item(std::size_t b) { return {data.data() + b * item_size(), item_size()}; }
  std::span<const double> item(std::size_t b) const { return {data.data() + b * item_size(), item_size()}; }

  bool operator==(const Tensor&) const = default;
};

inline std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + ")";
}

inline void require_rank(const Tensor& t, std::size_t rank, const char* who) {
  if (t.rank() != rank) {
    fail(ErrorCode::ShapeMismatch, std::string(who) + " expects rank " + std::to_string(rank) + ", got " +
                                       shape_string(t.shape));
  }
}

/// Batch subset in the given order.
inline Tensor gather(const Tensor& t, std::span<const std::size_t> rows) {
  auto shape = t.shape;
  shape[0] = rows.size();
  Tensor out(shape);
  const std::size_t n = t.item_size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = t.item(rows[i]);
    std::copy(src.begin(), src.end(), out.data.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  return out;
}

/// Dot product with four independent accumulators. Fixed summation order, so
/// results are reproducible, but faster than a single serial chain.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace vtac::nn

#pragma once

// Thin RAII layer over FFTW. Plans are built with FFTW_ESTIMATE on
// fftw_malloc'd buffers so plan choice, and therefore every transform, is
// reproducible run to run. FFTW's planner is not thread-safe; plan creation
// and destruction go through one process-wide mutex, execution does not.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <utility>

namespace vtac::fft {

using cplx = std::complex<double>;

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

/// Smallest n' >= n whose only prime factors are 2, 3, 5 and 7.
inline std::size_t good_size(std::size_t n) {
  if (n <= 1) return 1;
  for (std::size_t m = n;; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2u, 3u, 5u, 7u}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

/// Real input of length n to the n/2 + 1 non-negative frequency bins.
class RealForward {
 public:
  explicit RealForward(std::size_t n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  RealForward(const RealForward&) = delete;
  RealForward& operator=(const RealForward&) = delete;
  ~RealForward() {
    {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }

  std::size_t size() const { return n_; }
  std::span<double> input() { return {in_, n_}; }

  std::span<const cplx> execute() {
    fftw_execute(plan_);
    return {reinterpret_cast<const cplx*>(out_), n_ / 2 + 1};
  }

 private:
  std::size_t n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

/// In-place complex transform. Unnormalized in both directions.
class Complex {
 public:
  enum class Direction { Forward, Backward };

  Complex(std::size_t n, Direction dir) : n_(n) {
    buf_ = fftw_alloc_complex(n);
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_1d(static_cast<int>(n), buf_, buf_, dir == Direction::Forward ? FFTW_FORWARD : FFTW_BACKWARD,
                             FFTW_ESTIMATE);
  }
  Complex(const Complex&) = delete;
  Complex& operator=(const Complex&) = delete;
  ~Complex() {
    {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(buf_);
  }

  std::size_t size() const { return n_; }
  std::span<cplx> data() { return {reinterpret_cast<cplx*>(buf_), n_}; }
  void execute() { fftw_execute(plan_); }

 private:
  std::size_t n_;
  fftw_complex* buf_ = nullptr;
  fftw_plan plan_ = nullptr;
};

}  // namespace vtac::fft

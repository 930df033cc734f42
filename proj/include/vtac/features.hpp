#pragma once

// Per-channel signal features: time-domain moments, Welch spectra, spectral
// summaries, magnitude-squared coherence and Morlet wavelet energy.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "vtac/error.hpp"
#include "vtac/fft.hpp"
#include "vtac/matrix.hpp"
#include "vtac/wfdb.hpp"

namespace vtac::features {

using cplx = std::complex<double>;

struct TimeStats {
  double mean = 0.0;
  double std = 0.0;  // population
  double skewness = 0.0;
  double kurtosis = 0.0;  // excess: a normal distribution gives 0
  double rms = 0.0;
};

/// Central-moment statistics. Zero-variance input reports skewness and
/// kurtosis as 0.
inline TimeStats time_domain_stats(std::span<const double> x) {
  if (x.size() < 2) fail(ErrorCode::TooShort, "time-domain statistics need at least 2 samples");
  const auto n = static_cast<double>(x.size());
  TimeStats s;
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (*lo == *hi) {
    s.mean = x[0];
    s.rms = std::abs(x[0]);
    return s;
  }
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double v : x) {
    sum += v;
    sum_sq += v * v;
  }
  s.mean = sum / n;
  s.rms = std::sqrt(sum_sq / n);
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
  for (double v : x) {
    const double d = v - s.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  s.std = std::sqrt(m2);
  if (m2 > 0.0) {
    s.skewness = m3 / std::pow(m2, 1.5);
    s.kurtosis = m4 / (m2 * m2) - 3.0;
  }
  return s;
}

enum class WindowKind { Hann, Rectangular };

struct SpectralParams {
  std::size_t segment_length = 1000;
  double overlap = 0.5;
  WindowKind window = WindowKind::Hann;
  double fs = 250.0;

  /// 4 s Hann segments with 50% overlap.
  static SpectralParams defaults_for(double fs) {
    SpectralParams p;
    p.fs = fs;
    p.segment_length = static_cast<std::size_t>(std::llround(4.0 * fs));
    return p;
  }
};

struct PsdEstimate {
  std::vector<double> frequencies;
  std::vector<double> power;
  double df = 0.0;
};

namespace detail {

inline void validate(const SpectralParams& p) {
  if (p.segment_length < 8) fail(ErrorCode::InvalidConfig, "segment length must be at least 8 samples");
  if (!(p.overlap >= 0.0 && p.overlap < 1.0)) fail(ErrorCode::InvalidConfig, "overlap must lie in [0, 1)");
  if (!(p.fs > 0.0)) fail(ErrorCode::InvalidConfig, "sampling frequency must be positive");
}

/// Periodic Hann, w[n] = 0.5 - 0.5 cos(2 pi n / N).
inline std::vector<double> make_window(const SpectralParams& p) {
  std::vector<double> w(p.segment_length, 1.0);
  if (p.window == WindowKind::Hann) {
    const double n = static_cast<double>(p.segment_length);
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / n);
    }
  }
  return w;
}

inline std::size_t hop(const SpectralParams& p) {
  const auto overlap = static_cast<std::size_t>(std::floor(p.overlap * static_cast<double>(p.segment_length)));
  return std::max<std::size_t>(1, p.segment_length - overlap);
}

inline std::size_t segment_count(std::size_t n, const SpectralParams& p) {
  if (n < p.segment_length) return 0;
  return (n - p.segment_length) / hop(p) + 1;
}

/// One-sided spectra of every demeaned, windowed segment.
class SegmentTransformer {
 public:
  explicit SegmentTransformer(const SpectralParams& p) : params_(p), window_(make_window(p)), fft_(p.segment_length) {}

  std::size_t bins() const { return params_.segment_length / 2 + 1; }
  const std::vector<double>& window() const { return window_; }

  std::vector<cplx> transform(std::span<const double> x, std::size_t start) {
    const std::size_t len = params_.segment_length;
    double mean = 0.0;
    for (std::size_t i = 0; i < len; ++i) mean += x[start + i];
    mean /= static_cast<double>(len);
    auto in = fft_.input();
    for (std::size_t i = 0; i < len; ++i) in[i] = (x[start + i] - mean) * window_[i];
    auto out = fft_.execute();
    return {out.begin(), out.end()};
  }

 private:
  SpectralParams params_;
  std::vector<double> window_;
  fft::RealForward fft_;
};

/// Factor applied to bin k of a one-sided periodogram: 1 at DC and at the
/// Nyquist bin of an even-length segment, 2 elsewhere.
inline double one_sided_factor(std::size_t k, std::size_t segment_length) {
  if (k == 0) return 1.0;
  if (segment_length % 2 == 0 && k == segment_length / 2) return 1.0;
  return 2.0;
}

}  // namespace detail

/// Welch averaged periodogram, density scaling 1 / (fs * sum w^2).
inline PsdEstimate welch_psd(std::span<const double> x, const SpectralParams& params) {
  detail::validate(params);
  if (x.size() < params.segment_length) {
    fail(ErrorCode::TooShort, "signal of " + std::to_string(x.size()) + " samples is shorter than one segment");
  }
  detail::SegmentTransformer seg(params);
  const std::size_t n_bins = seg.bins();
  const std::size_t n_seg = detail::segment_count(x.size(), params);
  const std::size_t step = detail::hop(params);

  PsdEstimate psd;
  psd.power.assign(n_bins, 0.0);
  for (std::size_t s = 0; s < n_seg; ++s) {
    const auto spec = seg.transform(x, s * step);
    for (std::size_t k = 0; k < n_bins; ++k) psd.power[k] += std::norm(spec[k]);
  }
  double w2 = 0.0;
  for (double w : seg.window()) w2 += w * w;
  const double scale = 1.0 / (params.fs * w2 * static_cast<double>(n_seg));
  for (std::size_t k = 0; k < n_bins; ++k) psd.power[k] *= scale * detail::one_sided_factor(k, params.segment_length);

  psd.df = params.fs / static_cast<double>(params.segment_length);
  psd.frequencies.resize(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) psd.frequencies[k] = static_cast<double>(k) * psd.df;
  return psd;
}

/// Frequency of the strongest non-DC bin; ties resolve to the lower frequency.
inline double dominant_frequency(const PsdEstimate& psd) {
  if (psd.power.size() < 2) fail(ErrorCode::TooShort, "dominant frequency needs at least 2 bins");
  std::size_t best = 1;
  for (std::size_t k = 2; k < psd.power.size(); ++k) {
    if (psd.power[k] > psd.power[best]) best = k;
  }
  return psd.frequencies[best];
}

/// Shannon entropy of the normalized spectrum divided by log(N_bins), in [0, 1].
inline double spectral_entropy(const PsdEstimate& psd) {
  const std::size_t n = psd.power.size();
  if (n < 2) fail(ErrorCode::TooShort, "spectral entropy needs at least 2 bins");
  double total = 0.0;
  for (double p : psd.power) total += p;
  if (!(total > 0.0)) return 0.0;
  double h = 0.0;
  for (double p : psd.power) {
    if (p <= 0.0) continue;
    const double q = p / total;
    h -= q * std::log(q);
  }
  return std::clamp(h / std::log(static_cast<double>(n)), 0.0, 1.0);
}

/// Mean magnitude-squared coherence over non-DC bins, from Welch auto and
/// cross spectra. Bins with zero auto-power in either channel are skipped.
inline double coherence(std::span<const double> a, std::span<const double> b, const SpectralParams& params) {
  detail::validate(params);
  if (a.size() != b.size()) fail(ErrorCode::LengthMismatch, "coherence needs equal-length channels");
  if (a.size() < 2 * params.segment_length) {
    fail(ErrorCode::TooShort, "coherence needs at least two segments of signal");
  }
  detail::SegmentTransformer seg(params);
  const std::size_t n_bins = seg.bins();
  const std::size_t n_seg = detail::segment_count(a.size(), params);
  const std::size_t step = detail::hop(params);

  std::vector<double> saa(n_bins, 0.0);
  std::vector<double> sbb(n_bins, 0.0);
  std::vector<cplx> sab(n_bins, cplx{});
  for (std::size_t s = 0; s < n_seg; ++s) {
    const auto fa = seg.transform(a, s * step);
    const auto fb = seg.transform(b, s * step);
    for (std::size_t k = 0; k < n_bins; ++k) {
      saa[k] += std::norm(fa[k]);
      sbb[k] += std::norm(fb[k]);
      sab[k] += std::conj(fa[k]) * fb[k];
    }
  }
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 1; k < n_bins; ++k) {
    const double denom = saa[k] * sbb[k];
    if (!(denom > 0.0)) continue;
    sum += std::min(1.0, std::norm(sab[k]) / denom);
    ++used;
  }
  return used > 0 ? sum / static_cast<double>(used) : 0.0;
}

struct WaveletConfig {
  double omega0 = 6.0;
  std::vector<double> scales;  // strictly ascending, in samples

  /// `count` scales whose pseudo-frequencies omega0 * fs / (2 pi s) are
  /// log-spaced from f_hi down to f_lo. f_hi is capped at 0.45 fs.
  static WaveletConfig defaults_for(double fs, std::size_t count = 24, double f_lo = 0.5, double f_hi = 40.0,
                                    double omega0 = 6.0) {
    WaveletConfig c;
    c.omega0 = omega0;
    f_hi = std::min(f_hi, 0.45 * fs);
    const double ratio = count > 1 ? std::pow(f_lo / f_hi, 1.0 / static_cast<double>(count - 1)) : 1.0;
    for (std::size_t i = 0; i < count; ++i) {
      const double f = f_hi * std::pow(ratio, static_cast<double>(i));
      c.scales.push_back(c.omega0 * fs / (2.0 * std::numbers::pi * f));
    }
    return c;
  }

  double pseudo_frequency(std::size_t i, double fs) const {
    return omega0 * fs / (2.0 * std::numbers::pi * scales[i]);
  }
};

inline void validate(const WaveletConfig& c) {
  if (!(c.omega0 > 0.0)) fail(ErrorCode::InvalidConfig, "Morlet omega0 must be positive");
  if (c.scales.empty()) fail(ErrorCode::InvalidConfig, "wavelet scale list is empty");
  for (std::size_t i = 0; i < c.scales.size(); ++i) {
    if (!(c.scales[i] > 0.0)) fail(ErrorCode::InvalidConfig, "wavelet scales must be positive");
    if (i > 0 && !(c.scales[i] > c.scales[i - 1])) fail(ErrorCode::InvalidConfig, "wavelet scales must ascend");
  }
}

/// psi(t) = pi^{-1/4} e^{i omega0 t} e^{-t^2/2}
inline cplx morlet(double t, double omega0) {
  static const double norm = std::pow(std::numbers::pi, -0.25);
  return norm * std::exp(-0.5 * t * t) * cplx(std::cos(omega0 * t), std::sin(omega0 * t));
}

inline constexpr double kMorletSupport = 4.0;

/// Half-width in samples of the truncated kernel at scale s.
inline std::size_t morlet_half_width(double scale) {
  return static_cast<std::size_t>(std::floor(kMorletSupport * scale));
}

/// Complex coefficients, one row per scale, one column per sample.
struct CwtCoefficients {
  std::size_t n_scales = 0;
  std::size_t n_times = 0;
  std::vector<cplx> values;

  cplx operator()(std::size_t s, std::size_t t) const { return values[s * n_times + t]; }
  std::span<const cplx> row(std::size_t s) const { return {values.data() + s * n_times, n_times}; }
};

/// Morlet CWT for a fixed signal length, with the kernel spectra of every
/// scale precomputed. Reuse one instance across channels of equal length.
///
/// W_s[n] = s^{-1/2} sum_k x[k] conj(psi((k - n) / s)), kernel truncated at
/// |t| <= 4 and the signal zero-padded outside [0, T). Evaluated as a linear
/// convolution through FFTs of a length with no wrap-around.
class MorletTransform {
 public:
  MorletTransform(std::size_t n_times, WaveletConfig config)
      : n_times_(n_times), config_(std::move(config)),
        nfft_(fft::good_size(n_times + morlet_half_width(validated(config_).scales.back()) + 1)),
        forward_(nfft_, fft::Complex::Direction::Forward),
        backward_(nfft_, fft::Complex::Direction::Backward) {
    if (n_times < 16) fail(ErrorCode::TooShort, "CWT needs at least 16 samples");
    kernels_.reserve(config_.scales.size());
    for (double s : config_.scales) {
      auto buf = forward_.data();
      std::fill(buf.begin(), buf.end(), cplx{});
      const auto half = static_cast<std::ptrdiff_t>(morlet_half_width(s));
      const double amp = 1.0 / std::sqrt(s);
      // g[m] = conj(psi(-m / s)) / sqrt(s), negative m wrapped to the end.
      for (std::ptrdiff_t m = -half; m <= half; ++m) {
        const auto slot = static_cast<std::size_t>(m >= 0 ? m : static_cast<std::ptrdiff_t>(nfft_) + m);
        buf[slot] = amp * std::conj(morlet(-static_cast<double>(m) / s, config_.omega0));
      }
      forward_.execute();
      kernels_.emplace_back(buf.begin(), buf.end());
    }
  }

  const WaveletConfig& config() const { return config_; }
  std::size_t size() const { return n_times_; }

  CwtCoefficients transform(std::span<const double> x) {
    CwtCoefficients out;
    out.n_scales = config_.scales.size();
    out.n_times = n_times_;
    out.values.resize(out.n_scales * n_times_);
    run(x, [&](std::size_t s, std::span<const cplx> row) {
      std::copy(row.begin(), row.end(), out.values.begin() + static_cast<std::ptrdiff_t>(s * n_times_));
    });
    return out;
  }

  /// Per-scale sum_t |W|^2 / T without materializing the coefficient matrix.
  std::vector<double> scale_energies(std::span<const double> x) {
    std::vector<double> e(config_.scales.size(), 0.0);
    run(x, [&](std::size_t s, std::span<const cplx> row) {
      double acc = 0.0;
      for (const auto& c : row) acc += std::norm(c);
      e[s] = acc / static_cast<double>(n_times_);
    });
    return e;
  }

 private:
  static const WaveletConfig& validated(const WaveletConfig& c) {
    validate(c);
    return c;
  }

  template <typename Sink>
  void run(std::span<const double> x, Sink&& sink) {
    if (x.size() != n_times_) fail(ErrorCode::LengthMismatch, "CWT plan built for a different signal length");
    auto buf = forward_.data();
    std::fill(buf.begin(), buf.end(), cplx{});
    for (std::size_t i = 0; i < n_times_; ++i) buf[i] = x[i];
    forward_.execute();
    const std::vector<cplx> spectrum(buf.begin(), buf.end());

    const double inv_n = 1.0 / static_cast<double>(nfft_);
    std::vector<cplx> row(n_times_);
    for (std::size_t s = 0; s < kernels_.size(); ++s) {
      auto work = backward_.data();
      const auto& g = kernels_[s];
      for (std::size_t k = 0; k < nfft_; ++k) work[k] = spectrum[k] * g[k];
      backward_.execute();
      for (std::size_t t = 0; t < n_times_; ++t) row[t] = work[t] * inv_n;
      sink(s, std::span<const cplx>(row));
    }
  }

  std::size_t n_times_;
  WaveletConfig config_;
  std::size_t nfft_;
  fft::Complex forward_;
  fft::Complex backward_;
  std::vector<std::vector<cplx>> kernels_;
};

inline CwtCoefficients cwt_morlet(std::span<const double> x, const WaveletConfig& config) {
  if (x.size() < 16) fail(ErrorCode::TooShort, "CWT needs at least 16 samples");
  MorletTransform plan(x.size(), config);
  return plan.transform(x);
}

struct WaveletEnergy {
  double total = 0.0;
  std::vector<double> per_scale;
};

inline WaveletEnergy wavelet_energy(const CwtCoefficients& coeffs) {
  if (coeffs.n_scales == 0 || coeffs.n_times == 0) fail(ErrorCode::EmptyInput, "empty coefficient matrix");
  WaveletEnergy e;
  e.per_scale.assign(coeffs.n_scales, 0.0);
  for (std::size_t s = 0; s < coeffs.n_scales; ++s) {
    double acc = 0.0;
    for (const auto& c : coeffs.row(s)) acc += std::norm(c);
    e.per_scale[s] = acc / static_cast<double>(coeffs.n_times);
    e.total += e.per_scale[s];
  }
  return e;
}

enum class CoherenceMode { PerPair, Global };

struct FeatureOptions {
  CoherenceMode coherence = CoherenceMode::PerPair;
  double analysis_start_s = 0.0;   // offset into the window
  double analysis_length_s = 0.0;  // 0 = to the end of the window
};

struct FeatureVector {
  std::vector<double> values;
  std::vector<std::string> names;

  std::size_t size() const { return values.size(); }
};

inline constexpr std::size_t kFeaturesPerChannel = 8;

/// Names depend only on the channel count and the options, never on the data.
inline std::vector<std::string> feature_names(std::size_t n_channels, const FeatureOptions& options = {}) {
  static const char* per_channel[kFeaturesPerChannel] = {
      "mean", "std", "skewness", "excess_kurtosis", "rms", "dominant_freq_hz", "spectral_entropy", "wavelet_energy"};
  std::vector<std::string> names;
  for (std::size_t c = 0; c < n_channels; ++c) {
    for (const char* f : per_channel) names.push_back("ch" + std::to_string(c) + "_" + f);
  }
  if (options.coherence == CoherenceMode::PerPair) {
    for (std::size_t a = 0; a < n_channels; ++a) {
      for (std::size_t b = a + 1; b < n_channels; ++b) {
        names.push_back("coherence_ch" + std::to_string(a) + "_ch" + std::to_string(b));
      }
    }
  } else if (n_channels >= 2) {
    names.push_back("mean_coherence");
  }
  return names;
}

/// Reusable extractor: holds the Morlet plan for one window length so a batch
/// of equal-length windows pays for the kernel spectra once. Not thread-safe;
/// use one instance per thread.
class FeatureExtractor {
 public:
  FeatureExtractor(SpectralParams spectral, WaveletConfig wavelet, FeatureOptions options = {})
      : spectral_(spectral), wavelet_(std::move(wavelet)), options_(options) {
    detail::validate(spectral_);
    validate(wavelet_);
  }

  const SpectralParams& spectral() const { return spectral_; }
  const WaveletConfig& wavelet() const { return wavelet_; }
  const FeatureOptions& options() const { return options_; }

  FeatureVector extract(const wfdb::AlarmWindow& window) {
    if (std::any_of(window.missing_mask.begin(), window.missing_mask.end(), [](std::uint8_t m) { return m != 0; })) {
      fail(ErrorCode::InvalidConfig, "window '" + window.record_id + "' still has missing samples; impute first");
    }
    const std::size_t n_ch = window.samples.cols;
    const auto [first, count] = analysis_range(window);

    std::vector<std::vector<double>> channels(n_ch, std::vector<double>(count));
    for (std::size_t t = 0; t < count; ++t) {
      for (std::size_t c = 0; c < n_ch; ++c) channels[c][t] = window.samples(first + t, c);
    }

    if (!cwt_ || cwt_->size() != count) cwt_ = std::make_unique<MorletTransform>(count, wavelet_);

    FeatureVector fv;
    fv.names = feature_names(n_ch, options_);
    fv.values.reserve(fv.names.size());
    for (std::size_t c = 0; c < n_ch; ++c) {
      const auto stats = time_domain_stats(channels[c]);
      const auto psd = welch_psd(channels[c], spectral_);
      const auto energies = cwt_->scale_energies(channels[c]);
      double total_energy = 0.0;
      for (double e : energies) total_energy += e;
      fv.values.insert(fv.values.end(), {stats.mean, stats.std, stats.skewness, stats.kurtosis, stats.rms,
                                         dominant_frequency(psd), spectral_entropy(psd), total_energy});
    }
    std::vector<double> pair_values;
    for (std::size_t a = 0; a < n_ch; ++a) {
      for (std::size_t b = a + 1; b < n_ch; ++b) pair_values.push_back(coherence(channels[a], channels[b], spectral_));
    }
    if (options_.coherence == CoherenceMode::PerPair) {
      fv.values.insert(fv.values.end(), pair_values.begin(), pair_values.end());
    } else if (n_ch >= 2) {
      double sum = 0.0;
      for (double v : pair_values) sum += v;
      fv.values.push_back(sum / static_cast<double>(pair_values.size()));
    }
    for (double v : fv.values) {
      if (!std::isfinite(v)) fail(ErrorCode::InvalidConfig, "non-finite feature for '" + window.record_id + "'");
    }
    return fv;
  }

 private:
  std::pair<std::size_t, std::size_t> analysis_range(const wfdb::AlarmWindow& w) const {
    const double fs = w.sampling_frequency;
    const auto total = w.samples.rows;
    const auto first = static_cast<std::size_t>(std::llround(options_.analysis_start_s * fs));
    if (first >= total) fail(ErrorCode::WindowOutOfBounds, "analysis window starts past the end of the alarm window");
    std::size_t count = total - first;
    if (options_.analysis_length_s > 0.0) {
      const auto want = static_cast<std::size_t>(std::llround(options_.analysis_length_s * fs));
      if (want > count) fail(ErrorCode::WindowOutOfBounds, "analysis window runs past the end of the alarm window");
      count = want;
    }
    return {first, count};
  }

  SpectralParams spectral_;
  WaveletConfig wavelet_;
  FeatureOptions options_;
  std::unique_ptr<MorletTransform> cwt_;
};

/// Per channel: mean, std, skewness, excess kurtosis, rms, dominant frequency,
/// spectral entropy, total wavelet energy; then coherence per channel pair in
/// lexicographic order (or one global mean, per options).
inline FeatureVector build_feature_vector(const wfdb::AlarmWindow& window, const SpectralParams& spectral,
                                          const WaveletConfig& wavelet, const FeatureOptions& options = {}) {
  FeatureExtractor extractor(spectral, wavelet, options);
  return extractor.extract(window);
}

}  // namespace vtac::features

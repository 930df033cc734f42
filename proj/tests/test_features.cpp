#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "vtac/features.hpp"
#include "vtac/rng.hpp"
#include "oracles.hpp"

using namespace vtac;
using namespace vtac::features;
using oracle::noise;
using oracle::welch_direct;

namespace {

constexpr double kPi = std::numbers::pi;

// Direct-sum Morlet CWT.
std::vector<std::complex<double>> cwt_direct(const std::vector<double>& x, double s, double omega0) {
  const auto T = static_cast<std::ptrdiff_t>(x.size());
  const auto half = static_cast<std::ptrdiff_t>(std::floor(4.0 * s));
  std::vector<std::complex<double>> out(x.size());
  const double norm = std::pow(kPi, -0.25);
  for (std::ptrdiff_t n = 0; n < T; ++n) {
    std::complex<double> acc = 0.0;
    for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(0, n - half); k <= std::min(T - 1, n + half); ++k) {
      const double t = double(k - n) / s;
      const auto psi = norm * std::exp(-0.5 * t * t) * std::polar(1.0, omega0 * t);
      acc += x[k] * std::conj(psi);
    }
    out[n] = acc / std::sqrt(s);
  }
  return out;
}

}  // namespace

TEST(TimeStats, KnownValues) {
  const std::vector<double> x = {1, 2, 3, 4};
  const auto s = time_domain_stats(x);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.std, std::sqrt(1.25));
  EXPECT_NEAR(s.skewness, 0.0, 1e-15);
  EXPECT_NEAR(s.kurtosis, (0.25 * (2 * 5.0625 + 2 * 0.0625)) / (1.25 * 1.25) - 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(s.rms, std::sqrt(7.5));

  const std::vector<double> skewed = {0, 0, 0, 1};
  EXPECT_NEAR(time_domain_stats(skewed).skewness, 0.09375 / std::pow(0.1875, 1.5), 1e-12);
}

TEST(TimeStats, ConstantAndShortInput) {
  const std::vector<double> c(10, -2.0);
  const auto s = time_domain_stats(c);
  EXPECT_EQ(s.mean, -2.0);
  EXPECT_EQ(s.std, 0.0);
  EXPECT_EQ(s.skewness, 0.0);
  EXPECT_EQ(s.kurtosis, 0.0);
  EXPECT_EQ(s.rms, 2.0);
  const std::vector<double> one = {1.0};
  EXPECT_THROW(time_domain_stats(one), Error);
}

TEST(TimeStats, GaussianMomentsNearZero) {
  const auto x = noise(200000, 1);
  const auto s = time_domain_stats(x);
  EXPECT_NEAR(s.skewness, 0.0, 0.03);
  EXPECT_NEAR(s.kurtosis, 0.0, 0.05);
}

TEST(Welch, MatchesDirectDft) {
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 64 + rng.index(4096 - 64 + 1);
    const std::size_t L = 8 + rng.index(std::min<std::size_t>(n, 256) - 8 + 1);
    SpectralParams p;
    p.segment_length = L;
    p.overlap = rng.uniform(0.0, 0.9);
    p.window = rng.bernoulli(0.5) ? WindowKind::Hann : WindowKind::Rectangular;
    p.fs = rng.uniform(50.0, 500.0);
    const auto x = noise(n, 100 + trial);
    const auto psd = welch_psd(x, p);
    const auto ref = welch_direct(x, L, p.overlap, p.window == WindowKind::Hann, p.fs);
    ASSERT_EQ(psd.power.size(), ref.size());
    for (std::size_t k = 0; k < ref.size(); ++k) {
      if (k == 0) {
        EXPECT_NEAR(psd.power[0], ref[0], 1e-12 * ref[1]);  // demeaned: DC is rounding noise
        continue;
      }
      EXPECT_LE(std::abs(psd.power[k] - ref[k]), 1e-9 * std::abs(ref[k])) << "trial " << trial << " bin " << k;
    }
    EXPECT_DOUBLE_EQ(psd.df, p.fs / L);
  }
}

TEST(Welch, ParsevalSingleRectangularSegment) {
  for (std::size_t n : {64u, 100u, 1023u, 4096u}) {
    const auto x = noise(n, n);
    SpectralParams p;
    p.segment_length = n;
    p.overlap = 0.0;
    p.window = WindowKind::Rectangular;
    p.fs = 125.0;
    const auto psd = welch_psd(x, p);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= n;
    double integral = 0.0;
    for (double v : psd.power) integral += v * psd.df;
    EXPECT_NEAR(integral, var, 1e-9 * var) << n;
  }
}

TEST(Welch, SinusoidPeaksAtItsFrequency) {
  const double fs = 100.0;
  std::vector<double> x(4000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2 * kPi * 7.5 * i / fs);
  const auto psd = welch_psd(x, SpectralParams::defaults_for(fs));
  EXPECT_DOUBLE_EQ(dominant_frequency(psd), 7.5);
  EXPECT_LT(spectral_entropy(psd), 0.3);
  EXPECT_GT(spectral_entropy(welch_psd(noise(4000, 3), SpectralParams::defaults_for(fs))), 0.9);
}

TEST(Welch, TooShort) {
  std::vector<double> x(10);
  SpectralParams p;
  p.segment_length = 16;
  try {
    welch_psd(x, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooShort);
  }
}

TEST(DominantFrequency, TieGoesToLowerBin) {
  PsdEstimate p;
  p.power = {9, 1, 5, 5, 2};
  p.frequencies = {0, 1, 2, 3, 4};
  EXPECT_EQ(dominant_frequency(p), 2.0);
}

TEST(SpectralEntropy, FlatIsOneAndZeroPowerIsZero) {
  PsdEstimate p;
  p.power.assign(33, 2.0);
  EXPECT_NEAR(spectral_entropy(p), 1.0, 1e-12);
  p.power.assign(33, 0.0);
  EXPECT_EQ(spectral_entropy(p), 0.0);
}

TEST(Coherence, IdenticalAndIndependent) {
  const auto a = noise(8000, 4);
  auto b = noise(8000, 5);
  SpectralParams p = SpectralParams::defaults_for(100.0);
  EXPECT_NEAR(coherence(a, a, p), 1.0, 1e-12);
  std::vector<double> scaled(a);
  for (auto& v : scaled) v = 3.0 * v + 1.0;
  EXPECT_NEAR(coherence(a, scaled, p), 1.0, 1e-12);
  const double c = coherence(a, b, p);
  EXPECT_GE(c, 0.0);
  EXPECT_LT(c, 0.15);
  b.resize(7999);
  EXPECT_THROW(coherence(a, b, p), Error);
}

TEST(Morlet, MatchesDirectSum) {
  Rng rng(9);
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t n = 200 + rng.index(800);
    const auto x = noise(n, 50 + trial);
    WaveletConfig cfg = WaveletConfig::defaults_for(100.0, 8, 1.0, 40.0);
    const auto coeffs = cwt_morlet(x, cfg);
    for (std::size_t s = 0; s < cfg.scales.size(); ++s) {
      const auto ref = cwt_direct(x, cfg.scales[s], cfg.omega0);
      double err = 0.0, mag = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        err = std::max(err, std::abs(coeffs(s, t) - ref[t]));
        mag = std::max(mag, std::abs(ref[t]));
      }
      EXPECT_LE(err, 1e-9 * mag) << "scale " << cfg.scales[s];
    }
  }
}

TEST(Morlet, EnergyPeaksAtMatchingScale) {
  const double fs = 125.0;
  std::vector<double> x(2000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2 * kPi * 3.0 * i / fs);
  const auto cfg = WaveletConfig::defaults_for(fs);
  const auto e = wavelet_energy(cwt_morlet(x, cfg));
  const auto best = std::max_element(e.per_scale.begin(), e.per_scale.end()) - e.per_scale.begin();
  const double f = cfg.pseudo_frequency(static_cast<std::size_t>(best), fs);
  EXPECT_NEAR(std::log(f / 3.0), 0.0, 0.15);

  MorletTransform plan(x.size(), cfg);
  const auto fast = plan.scale_energies(x);
  for (std::size_t s = 0; s < fast.size(); ++s) EXPECT_NEAR(fast[s], e.per_scale[s], 1e-12 * e.total);
}

TEST(Morlet, DefaultScalesCoverBandAndCapAtNyquistFraction) {
  const auto cfg = WaveletConfig::defaults_for(250.0);
  EXPECT_EQ(cfg.scales.size(), 24u);
  // Ascending scales: index 0 is the highest frequency.
  EXPECT_NEAR(cfg.pseudo_frequency(0, 250.0), 40.0, 1e-9);
  EXPECT_NEAR(cfg.pseudo_frequency(23, 250.0), 0.5, 1e-9);
  const auto low_fs = WaveletConfig::defaults_for(50.0);
  EXPECT_NEAR(low_fs.pseudo_frequency(0, 50.0), 22.5, 1e-9);
  WaveletConfig bad;
  bad.scales = {2.0, 1.0};
  EXPECT_THROW(validate(bad), Error);
}

TEST(FeatureVector, LayoutAndNames) {
  wfdb::AlarmWindow w;
  w.sampling_frequency = 50;
  w.samples = Matrix(50 * 40, 3);
  Rng rng(1);
  for (auto& v : w.samples.data) v = rng.normal();
  w.missing_mask.assign(w.samples.data.size(), 0);

  const auto spec = SpectralParams::defaults_for(50);
  const auto wav = WaveletConfig::defaults_for(50);
  const auto fv = build_feature_vector(w, spec, wav);
  EXPECT_EQ(fv.size(), 8u * 3 + 3);
  EXPECT_EQ(fv.names.size(), fv.size());
  EXPECT_EQ(fv.names[0], "ch0_mean");
  EXPECT_EQ(fv.names[13], "ch1_dominant_freq_hz");
  EXPECT_EQ(fv.names[24], "coherence_ch0_ch1");
  EXPECT_EQ(fv.names[26], "coherence_ch1_ch2");

  const auto ch1 = w.samples.column(1);
  const auto stats = time_domain_stats(ch1);
  EXPECT_DOUBLE_EQ(fv.values[8], stats.mean);
  EXPECT_DOUBLE_EQ(fv.values[9], stats.std);
  EXPECT_DOUBLE_EQ(fv.values[13], dominant_frequency(welch_psd(ch1, spec)));
  EXPECT_DOUBLE_EQ(fv.values[15], wavelet_energy(cwt_morlet(ch1, wav)).total);
  EXPECT_DOUBLE_EQ(fv.values[24], coherence(w.samples.column(0), ch1, spec));

  FeatureOptions global;
  global.coherence = CoherenceMode::Global;
  const auto g = build_feature_vector(w, spec, wav, global);
  EXPECT_EQ(g.size(), 8u * 3 + 1);
  EXPECT_EQ(g.names.back(), "mean_coherence");
  EXPECT_NEAR(g.values.back(), (fv.values[24] + fv.values[25] + fv.values[26]) / 3.0, 1e-15);
}

TEST(FeatureVector, RejectsUnimputedWindow) {
  wfdb::AlarmWindow w;
  w.sampling_frequency = 50;
  w.samples = Matrix(1000, 1);
  w.missing_mask.assign(1000, 0);
  w.missing_mask[5] = 1;
  EXPECT_THROW(build_feature_vector(w, SpectralParams::defaults_for(50), WaveletConfig::defaults_for(50)), Error);
}

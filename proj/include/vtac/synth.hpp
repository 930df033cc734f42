#pragma once

// Synthetic stand-ins for ICU alarm records. The "VT" surrogate is a
// fast oscillation added after the alarm onset; it is not a physiological
// model and carries no clinical meaning.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "vtac/error.hpp"
#include "vtac/matrix.hpp"
#include "vtac/rng.hpp"
#include "vtac/text.hpp"
#include "vtac/wfdb.hpp"

namespace vtac::synth {

struct SynthConfig {
  std::size_t n_events = 500;
  double class_ratio = 0.286;  // fraction of true alarms
  double fs = 125.0;
  double separability = 2.0;
  std::uint64_t seed = 0;
};

inline void validate(const SynthConfig& c) {
  if (c.n_events == 0) fail(ErrorCode::InvalidConfig, "n_events must be positive");
  if (!(c.class_ratio > 0.0 && c.class_ratio < 1.0)) fail(ErrorCode::InvalidConfig, "class_ratio must lie in (0, 1)");
  if (!(c.fs >= 50.0) || !std::isfinite(c.fs)) fail(ErrorCode::InvalidConfig, "fs must be at least 50 Hz");
  if (!(c.separability >= 0.0) || !std::isfinite(c.separability)) {
    fail(ErrorCode::InvalidConfig, "separability must be a finite value >= 0");
  }
}

inline constexpr double kRecordSeconds = 400.0;
inline constexpr std::size_t kChannels = 3;  // ECG II, ECG V, PLETH
inline constexpr double kBurstAmplitudePerUnit = 0.75;
inline constexpr double kMarkerAmplitude = 1.0;

struct SynthEvent {
  wfdb::WaveformRecord record;
  double alarm_time_s = 0.0;
  wfdb::AlarmLabel label = wfdb::AlarmLabel::FalseAlarm;
};

inline std::string event_name(std::size_t index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 5) digits.insert(0, 5 - digits.size(), '0');
  return "evt" + digits;
}

/// One 400 s, 3-channel record. Every random draw happens in the same order
/// for both labels, so the label only switches the burst amplitude on or off:
/// at separability 0 the two classes are identically distributed.
inline SynthEvent generate_waveform_event(const SynthConfig& config, std::size_t index, wfdb::AlarmLabel label) {
  validate(config);
  Rng rng(derive_seed(config.seed, index));
  const double fs = config.fs;
  const auto n = static_cast<std::size_t>(std::llround(kRecordSeconds * fs));
  constexpr double two_pi = 2.0 * std::numbers::pi;

  const double base_hz = rng.uniform(60.0, 100.0) / 60.0;
  const double burst_hz = rng.uniform(150.0, 220.0) / 60.0;
  const double alarm_time = std::round(rng.uniform(310.0, 330.0) * fs) / fs;
  const auto onset = static_cast<std::size_t>(std::llround(alarm_time * fs));
  double phase[2][5];
  for (auto& ch : phase) {
    for (double& p : ch) p = rng.uniform(0.0, two_pi);
  }
  const double pleth_phase = rng.uniform(0.0, two_pi);
  const double burst_phase = rng.uniform(0.0, two_pi);
  const double burst_amp = label == wfdb::AlarmLabel::TrueAlarm ? kBurstAmplitudePerUnit * config.separability : 0.0;

  SynthEvent ev;
  ev.alarm_time_s = alarm_time;
  ev.label = label;
  auto& rec = ev.record;
  rec.header.record_name = event_name(index);
  rec.header.n_signals = kChannels;
  rec.header.sampling_frequency = fs;
  rec.header.n_samples = n;
  const char* names[kChannels] = {"ECG II", "ECG V", "PLETH"};
  const char* units[kChannels] = {"mV", "mV", "NU"};
  for (std::size_t c = 0; c < kChannels; ++c) {
    wfdb::SignalSpec s;
    s.file_name = rec.header.record_name + ".dat";
    s.adc_gain = 200.0;
    s.units = units[c];
    s.description = names[c];
    rec.header.signals.push_back(s);
  }
  rec.samples = Matrix(n, kChannels);
  rec.missing_mask.assign(n * kChannels, 0);

  const double lead_gain[2] = {1.0, 0.8};
  for (std::size_t t = 0; t < n; ++t) {
    const double time = static_cast<double>(t) / fs;
    const double burst = t >= onset ? burst_amp * std::sin(two_pi * burst_hz * time + burst_phase) : 0.0;
    for (std::size_t c = 0; c < 2; ++c) {
      double v = 0.0;
      for (int h = 1; h <= 5; ++h) v += 0.6 / h * std::sin(two_pi * h * base_hz * time + phase[c][h - 1]);
      rec.samples(t, c) = lead_gain[c] * (v + burst) + rng.normal(0.0, 0.05);
    }
    rec.samples(t, 2) = 0.5 + 0.3 * std::sin(two_pi * base_hz * time + pleth_phase) +
                        0.1 * std::sin(2.0 * two_pi * base_hz * time + pleth_phase) + rng.normal(0.0, 0.02);
  }
  rec.samples(onset, 2) += kMarkerAmplitude;

  // Nuisances shared by both classes, kept clear of the last 10 s before onset.
  const auto guard = static_cast<std::size_t>(std::llround((alarm_time - 10.0) * fs));
  if (rng.bernoulli(0.3)) {
    const auto len = static_cast<std::size_t>(std::llround(rng.uniform(0.5, 2.0) * fs));
    const auto start = rng.index(guard - len);
    const auto ch = rng.index(kChannels);
    for (std::size_t t = start; t < start + len; ++t) rec.missing_mask[t * kChannels + ch] = 1;
  }
  if (rng.bernoulli(0.2)) {
    const auto len = static_cast<std::size_t>(std::llround(0.2 * fs));
    const auto start = rng.index(guard - len);
    const auto ch = rng.index(2);
    const double amp = rng.uniform(-2.0, 2.0);
    for (std::size_t t = start; t < start + len; ++t) rec.samples(t, ch) += amp;
  }
  for (std::size_t i = 0; i < rec.missing_mask.size(); ++i) {
    if (rec.missing_mask[i]) rec.samples.data[i] = 0.0;
  }
  return ev;
}

/// Labels for a corpus: exactly round(n * class_ratio) true alarms, placed by
/// a seeded permutation.
inline std::vector<wfdb::AlarmLabel> corpus_labels(const SynthConfig& config) {
  validate(config);
  const auto n_true = static_cast<std::size_t>(std::llround(static_cast<double>(config.n_events) * config.class_ratio));
  std::vector<std::size_t> order(config.n_events);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(config.seed, 0x1ABE1));
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<wfdb::AlarmLabel> labels(config.n_events, wfdb::AlarmLabel::FalseAlarm);
  for (std::size_t i = 0; i < n_true; ++i) labels[order[i]] = wfdb::AlarmLabel::TrueAlarm;
  return labels;
}

struct CorpusSummary {
  std::vector<wfdb::AlarmEvent> events;
  std::size_t n_true = 0;
};

/// Write `<dir>/<evtNNNNN>.hea/.dat` for every event plus `<dir>/alarms.csv`.
inline CorpusSummary write_corpus(const std::filesystem::path& dir, const SynthConfig& config,
                                  wfdb::StorageFormat format = wfdb::StorageFormat::Fmt16,
                                  const std::string& comment = {}) {
  const auto labels = corpus_labels(config);
  CorpusSummary summary;
  std::vector<std::string> comments;
  if (!comment.empty()) comments.push_back(comment);
  for (std::size_t i = 0; i < config.n_events; ++i) {
    const auto ev = generate_waveform_event(config, i, labels[i]);
    wfdb::save_record(dir, wfdb::write_record(ev.record, format, comments));
    summary.events.push_back({ev.record.header.record_name, ev.alarm_time_s, ev.label});
    if (ev.label == wfdb::AlarmLabel::TrueAlarm) ++summary.n_true;
  }
  text::write_file(dir / "alarms.csv", wfdb::format_alarm_index(summary.events, comment));
  return summary;
}

struct FeatureDataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<double> direction;  // unit vector joining the class means
};

/// Two unit-covariance Gaussians whose means are `separability` apart along a
/// random unit direction, centred on the origin. Exactly round(n * class_ratio)
/// rows are labelled 1.
inline FeatureDataset generate_feature_dataset(std::size_t n, std::size_t d, double separability, double class_ratio,
                                               std::uint64_t seed) {
  if (n < 20 || d < 2) fail(ErrorCode::InvalidConfig, "feature dataset needs n >= 20 and d >= 2");
  if (!(class_ratio > 0.0 && class_ratio < 1.0)) fail(ErrorCode::InvalidConfig, "class_ratio must lie in (0, 1)");
  if (!(separability >= 0.0) || !std::isfinite(separability)) {
    fail(ErrorCode::InvalidConfig, "separability must be a finite value >= 0");
  }
  Rng rng(seed);
  FeatureDataset ds;
  ds.direction.resize(d);
  double norm = 0.0;
  while (norm < 1e-12) {
    norm = 0.0;
    for (auto& v : ds.direction) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
  }
  for (auto& v : ds.direction) v /= norm;

  const auto n_true = static_cast<std::size_t>(std::llround(static_cast<double>(n) * class_ratio));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  ds.labels.assign(n, 0);
  for (std::size_t i = 0; i < n_true; ++i) ds.labels[order[i]] = 1;

  ds.features = Matrix(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    const double shift = (ds.labels[r] == 1 ? 0.5 : -0.5) * separability;
    for (std::size_t j = 0; j < d; ++j) ds.features(r, j) = rng.normal() + shift * ds.direction[j];
  }
  return ds;
}

}  // namespace vtac::synth

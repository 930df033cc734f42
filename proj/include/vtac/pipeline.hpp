#pragma once

// Stage orchestration shared by the command-line tool and the tests.
//
// Directory layout, each stage reading the previous stage's output:
//   synth     --out RAW              RAW/<id>.hea, RAW/<id>.dat, RAW/alarms.csv
//   ingest    --data RAW --out WIN   360 s window records + WIN/windows.csv
//   featurize --data WIN --out FEAT  FEAT/features.csv
//   train     --data FEAT|WIN --out MODEL
//             MODEL/model.ckpt, scaler.txt, split.csv, history.csv
//   evaluate  --data FEAT|WIN --model MODEL --out EVAL
//             EVAL/report.json, EVAL/scores.csv
//   predict   --data FEAT|WIN --model MODEL --out PRED
//             PRED/alerts.csv
// fcnn models read features.csv; cnn models read the ingested windows.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "vtac/dataset_io.hpp"
#include "vtac/error.hpp"
#include "vtac/eval.hpp"
#include "vtac/features.hpp"
#include "vtac/imbalance.hpp"
#include "vtac/matrix.hpp"
#include "vtac/nn/checkpoint.hpp"
#include "vtac/nn/model.hpp"
#include "vtac/nn/train.hpp"
#include "vtac/preprocess.hpp"
#include "vtac/rng.hpp"
#include "vtac/synth.hpp"
#include "vtac/text.hpp"
#include "vtac/wfdb.hpp"

namespace vtac::pipeline {

namespace fs = std::filesystem;

struct PipelineConfig {
  fs::path data_dir;
  fs::path out_dir = "out";
  fs::path model_dir;
  fs::path split_file;  // optional external record_id,split file
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0: one per hardware thread

  // synth
  synth::SynthConfig synth;
  wfdb::StorageFormat synth_format = wfdb::StorageFormat::Fmt16;

  // ingest
  std::string alarm_file = "alarms.csv";
  std::size_t n_channels = 0;  // keep the first n channels; 0 keeps all

  // featurize
  double segment_seconds = 4.0;
  double overlap = 0.5;
  features::WindowKind psd_window = features::WindowKind::Hann;
  std::size_t wavelet_scales = 24;
  double wavelet_f_lo = 0.5;
  double wavelet_f_hi = 40.0;
  double omega0 = 6.0;
  features::FeatureOptions feature_options;

  // train
  std::optional<nn::Architecture> architecture;  // unset: fcnn for train, checkpoint's for evaluate
  nn::ModelHyperparams model;
  nn::TrainConfig train;
  imbalance::ResampleConfig resample;
  bool class_weights = false;
  std::size_t decimation = 4;
  double cnn_start_s = 0.0;
  double cnn_length_s = 0.0;  // 0: to the end of the window

  // evaluate / predict
  double threshold = 0.5;
  std::string eval_split;  // train|val|test|all; empty: test (evaluate), all (predict)
};

inline void validate(const PipelineConfig& c) {
  if (!(c.threshold >= 0.0 && c.threshold <= 1.0)) fail(ErrorCode::ConfigError, "threshold must lie in [0, 1]");
  if (!(c.segment_seconds > 0.0)) fail(ErrorCode::ConfigError, "segment length must be positive");
  if (!(c.overlap >= 0.0 && c.overlap < 1.0)) fail(ErrorCode::ConfigError, "overlap must lie in [0, 1)");
  if (c.wavelet_scales == 0 || !(c.wavelet_f_lo > 0.0) || !(c.wavelet_f_hi > c.wavelet_f_lo)) {
    fail(ErrorCode::ConfigError, "wavelet band must satisfy 0 < f_lo < f_hi with at least one scale");
  }
  if (c.decimation == 0) fail(ErrorCode::ConfigError, "decimation must be at least 1");
  if (!c.eval_split.empty() && c.eval_split != "train" && c.eval_split != "val" && c.eval_split != "test" &&
      c.eval_split != "all") {
    fail(ErrorCode::ConfigError, "split must be train, val, test or all");
  }
  if (c.class_weights && c.resample.method != imbalance::Method::None) {
    fail(ErrorCode::ConfigError, "class weights and oversampling are alternatives; pick one");
  }
  try {
    imbalance::validate(c.resample);
  } catch (const Error& e) {
    fail(ErrorCode::ConfigError, e.message());
  }
}

/// Canonical text of every setting that can change an output. Paths and the
/// thread count are excluded so relocated or parallel runs hash the same.
inline std::string canonical_config(const PipelineConfig& c) {
  auto d = [](double v) { return text::format_double(v); };
  std::string hidden;
  for (auto h : c.model.hidden) hidden += (hidden.empty() ? "" : ",") + std::to_string(h);
  std::string s;
  s += "seed=" + std::to_string(c.seed) + '\n';
  s += "synth.n_events=" + std::to_string(c.synth.n_events) + '\n';
  s += "synth.class_ratio=" + d(c.synth.class_ratio) + '\n';
  s += "synth.fs=" + d(c.synth.fs) + '\n';
  s += "synth.separability=" + d(c.synth.separability) + '\n';
  s += "synth.format=" + std::to_string(static_cast<int>(c.synth_format)) + '\n';
  s += "ingest.alarm_file=" + c.alarm_file + '\n';
  s += "ingest.channels=" + std::to_string(c.n_channels) + '\n';
  s += "spectral.segment_seconds=" + d(c.segment_seconds) + '\n';
  s += "spectral.overlap=" + d(c.overlap) + '\n';
  s += std::string("spectral.window=") + (c.psd_window == features::WindowKind::Hann ? "hann" : "rect") + '\n';
  s += "wavelet.scales=" + std::to_string(c.wavelet_scales) + '\n';
  s += "wavelet.f_lo=" + d(c.wavelet_f_lo) + '\n';
  s += "wavelet.f_hi=" + d(c.wavelet_f_hi) + '\n';
  s += "wavelet.omega0=" + d(c.omega0) + '\n';
  s += std::string("features.coherence=") +
       (c.feature_options.coherence == features::CoherenceMode::PerPair ? "pair" : "global") + '\n';
  s += "features.start_s=" + d(c.feature_options.analysis_start_s) + '\n';
  s += "features.length_s=" + d(c.feature_options.analysis_length_s) + '\n';
  s += std::string("model.arch=") + (c.architecture ? nn::to_string(*c.architecture) : "auto") + '\n';
  s += "model.hidden=" + hidden + '\n';
  s += "model.conv_filters=" + std::to_string(c.model.conv_filters) + '\n';
  s += "model.filter_size=" + std::to_string(c.model.filter_size) + '\n';
  s += "model.heads=" + std::to_string(c.model.heads) + '\n';
  s += "model.decimation=" + std::to_string(c.decimation) + '\n';
  s += "model.cnn_start_s=" + d(c.cnn_start_s) + '\n';
  s += "model.cnn_length_s=" + d(c.cnn_length_s) + '\n';
  s += "train.lr=" + d(c.train.learning_rate) + '\n';
  s += "train.batch=" + std::to_string(c.train.batch_size) + '\n';
  s += "train.epochs=" + std::to_string(c.train.max_epochs) + '\n';
  s += "train.patience=" + std::to_string(c.train.patience) + '\n';
  s += "train.dropout=" + d(c.train.dropout_p) + '\n';
  s += std::string("resample.method=") + imbalance::to_string(c.resample.method) + '\n';
  s += "resample.ratio=" + d(c.resample.ratio) + '\n';
  s += "resample.k=" + std::to_string(c.resample.k_neighbors) + '\n';
  s += std::string("class_weights=") + (c.class_weights ? "true" : "false") + '\n';
  s += "threshold=" + d(c.threshold) + '\n';
  s += "eval_split=" + c.eval_split + '\n';
  return s;
}

inline std::string config_hash(const PipelineConfig& c) { return text::hex64(text::fnv1a(canonical_config(c))); }

/// Header line stamped on every output file.
inline std::string provenance(const PipelineConfig& c, std::string_view stage) {
  return "vtac " + std::string(stage) + " config_hash=" + config_hash(c) + " seed=" + std::to_string(c.seed);
}

// Seeds for the individual stochastic stages, all derived from the run seed.
inline std::uint64_t split_seed(const PipelineConfig& c) { return derive_seed(c.seed, 1); }
inline std::uint64_t resample_seed(const PipelineConfig& c) { return derive_seed(c.seed, 2); }
inline std::uint64_t init_seed(const PipelineConfig& c) { return derive_seed(c.seed, 3); }
inline std::uint64_t train_seed(const PipelineConfig& c) { return derive_seed(c.seed, 4); }

namespace detail {

inline const fs::path& require_dir(const fs::path& p, const char* what) {
  if (p.empty()) fail(ErrorCode::ConfigError, std::string(what) + " directory not set");
  return p;
}

inline std::size_t thread_count(const PipelineConfig& c, std::size_t jobs) {
  std::size_t n = c.threads > 0 ? c.threads : std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(n, jobs));
}

/// Run fn(i, worker) for i in [0, n) on `workers` threads. Results must be
/// written by index so the output does not depend on scheduling. The error
/// from the lowest failing index is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr error;
  std::size_t error_index = n;
  auto body = [&](std::size_t worker) {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i, worker);
      } catch (...) {
        std::lock_guard lock(err_mutex);
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
  };
  if (workers <= 1) {
    body(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body, w);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

inline wfdb::AlarmWindow load_window(const fs::path& dir, const wfdb::AlarmEvent& e) {
  const auto rec = wfdb::load_record(dir / (e.record_id + ".hea"));
  return wfdb::extract_alarm_window(rec, e.alarm_time_s, e.label);
}

inline std::vector<wfdb::AlarmEvent> read_window_index(const fs::path& dir) {
  const auto events = wfdb::parse_alarm_index(text::read_file(dir / "windows.csv"));
  if (events.empty()) fail(ErrorCode::EmptyInput, "no windows listed in " + (dir / "windows.csv").string());
  return events;
}

inline std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? std::string(1, sep) : "") + parts[i];
  return out;
}

}  // namespace detail

inline features::SpectralParams spectral_params(const PipelineConfig& c, double fs) {
  features::SpectralParams p;
  p.fs = fs;
  p.segment_length = static_cast<std::size_t>(std::llround(c.segment_seconds * fs));
  p.overlap = c.overlap;
  p.window = c.psd_window;
  return p;
}

inline features::WaveletConfig wavelet_config(const PipelineConfig& c, double fs) {
  return features::WaveletConfig::defaults_for(fs, c.wavelet_scales, c.wavelet_f_lo, c.wavelet_f_hi, c.omega0);
}

// ---------------------------------------------------------------- synth

inline std::string cmd_synth(const PipelineConfig& cfg) {
  validate(cfg);
  auto sc = cfg.synth;
  sc.seed = cfg.seed;
  const auto& out = detail::require_dir(cfg.out_dir, "output");
  const auto summary = synth::write_corpus(out, sc, cfg.synth_format, provenance(cfg, "synth"));
  return "synth: wrote " + std::to_string(summary.events.size()) + " records (" + std::to_string(summary.n_true) +
         " true alarms) to " + out.string();
}

// ---------------------------------------------------------------- ingest

/// Cut every indexed alarm out of its record and store the 360 s windows as
/// 16-bit WFDB records with the source gains, so the stored samples are the
/// source ADC values and the missing-sample mask survives.
inline std::string cmd_ingest(const PipelineConfig& cfg) {
  validate(cfg);
  const auto& in = detail::require_dir(cfg.data_dir, "data");
  const auto& out = detail::require_dir(cfg.out_dir, "output");
  const auto events = wfdb::parse_alarm_index(text::read_file(in / cfg.alarm_file));
  if (events.empty()) fail(ErrorCode::EmptyInput, "alarm index lists no events");

  std::map<std::string, std::size_t> seen;
  std::vector<wfdb::AlarmEvent> windows(events.size());
  std::vector<std::uint8_t> ok(events.size(), 0);
  std::vector<std::string> names(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto k = seen[events[i].record_id]++;
    names[i] = k == 0 ? events[i].record_id : events[i].record_id + "_a" + std::to_string(k);
  }
  const auto comment = provenance(cfg, "ingest");
  std::size_t skipped_short = 0;
  std::mutex count_mutex;

  detail::parallel_for(events.size(), detail::thread_count(cfg, events.size()), [&](std::size_t i, std::size_t) {
    const auto& e = events[i];
    auto rec = wfdb::load_record(in / (e.record_id + ".hea"));
    std::size_t keep = rec.samples.cols;
    if (cfg.n_channels > 0) {
      if (rec.samples.cols < cfg.n_channels) {
        std::lock_guard lock(count_mutex);
        ++skipped_short;
        return;
      }
      keep = cfg.n_channels;
    }
    auto w = wfdb::extract_alarm_window(rec, e.alarm_time_s, e.label);

    wfdb::WaveformRecord out_rec;
    out_rec.header.record_name = names[i];
    out_rec.header.n_signals = keep;
    out_rec.header.sampling_frequency = w.sampling_frequency;
    out_rec.header.n_samples = w.samples.rows;
    out_rec.header.signals.assign(rec.header.signals.begin(), rec.header.signals.begin() + static_cast<std::ptrdiff_t>(keep));
    out_rec.samples = Matrix(w.samples.rows, keep);
    out_rec.missing_mask.assign(w.samples.rows * keep, 0);
    for (std::size_t t = 0; t < w.samples.rows; ++t) {
      for (std::size_t c = 0; c < keep; ++c) {
        out_rec.samples(t, c) = w.samples(t, c);
        out_rec.missing_mask[t * keep + c] = w.missing_mask[t * w.samples.cols + c];
      }
    }
    wfdb::save_record(out, wfdb::write_record(out_rec, wfdb::StorageFormat::Fmt16, {comment}));
    windows[i] = {names[i], wfdb::kPreAlarmSeconds, e.label};
    ok[i] = 1;
  });

  std::vector<wfdb::AlarmEvent> kept;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (ok[i]) kept.push_back(windows[i]);
  }
  if (kept.empty()) fail(ErrorCode::EmptyInput, "no alarm window survived ingest");
  text::write_file(out / "windows.csv", wfdb::format_alarm_index(kept, comment));
  std::string line = "ingest: wrote " + std::to_string(kept.size()) + " windows to " + out.string();
  if (skipped_short > 0) line += " (skipped " + std::to_string(skipped_short) + " records with too few channels)";
  return line;
}

// ---------------------------------------------------------------- featurize

/// Impute and featurize every ingested window, in parallel across windows.
inline FeatureTable featurize_windows(const PipelineConfig& cfg, const fs::path& dir,
                                      const std::vector<wfdb::AlarmEvent>& events) {
  const std::size_t n = events.size();
  const std::size_t workers = detail::thread_count(cfg, n);
  std::vector<std::map<double, std::unique_ptr<features::FeatureExtractor>>> extractors(workers);
  std::vector<features::FeatureVector> rows(n);
  detail::parallel_for(n, workers, [&](std::size_t i, std::size_t worker) {
    const auto window = preprocess::impute_mean(detail::load_window(dir, events[i]));
    auto& slot = extractors[worker][window.sampling_frequency];
    if (!slot) {
      const double fs = window.sampling_frequency;
      slot = std::make_unique<features::FeatureExtractor>(spectral_params(cfg, fs), wavelet_config(cfg, fs),
                                                          cfg.feature_options);
    }
    rows[i] = slot->extract(window);
  });

  FeatureTable t;
  t.names = rows.front().names;
  t.features = Matrix(n, t.names.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].names != t.names) {
      fail(ErrorCode::DimensionMismatch, "window '" + events[i].record_id +
                                             "' has a different channel count; ingest with a fixed channel count");
    }
    std::copy(rows[i].values.begin(), rows[i].values.end(), t.features.row(i).begin());
    t.record_ids.push_back(events[i].record_id);
    t.labels.push_back(wfdb::to_int(events[i].label));
  }
  return t;
}

inline std::string cmd_featurize(const PipelineConfig& cfg) {
  validate(cfg);
  const auto& in = detail::require_dir(cfg.data_dir, "data");
  const auto& out = detail::require_dir(cfg.out_dir, "output");
  const auto events = detail::read_window_index(in);
  const auto table = featurize_windows(cfg, in, events);
  text::write_file(out / "features.csv", format_feature_csv(table, provenance(cfg, "featurize")));
  return "featurize: wrote " + std::to_string(table.features.rows) + " x " + std::to_string(table.features.cols) +
         " features to " + (out / "features.csv").string();
}

// ---------------------------------------------------------------- model inputs

/// How raw windows become CNN input: optional crop, then block-mean
/// decimation by `decimation` samples.
struct WaveformPrep {
  std::size_t decimation = 4;
  double start_s = 0.0;
  double length_s = 0.0;
};

inline Matrix prepare_waveform(const wfdb::AlarmWindow& w, const WaveformPrep& prep) {
  const double fs = w.sampling_frequency;
  const auto first = static_cast<std::size_t>(std::llround(prep.start_s * fs));
  if (first >= w.samples.rows) fail(ErrorCode::WindowOutOfBounds, "cnn crop starts past the end of the window");
  std::size_t count = w.samples.rows - first;
  if (prep.length_s > 0.0) {
    const auto want = static_cast<std::size_t>(std::llround(prep.length_s * fs));
    if (want > count) fail(ErrorCode::WindowOutOfBounds, "cnn crop runs past the end of the window");
    count = want;
  }
  const std::size_t q = prep.decimation;
  const std::size_t t_out = count / q;
  if (t_out < 2) fail(ErrorCode::TooShort, "cnn input has fewer than 2 steps after decimation");
  const std::size_t c = w.samples.cols;
  Matrix m(t_out, c);
  for (std::size_t t = 0; t < t_out; ++t) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (std::size_t k = 0; k < q; ++k) s += w.samples(first + t * q + k, ch);
      m(t, ch) = s / static_cast<double>(q);
    }
  }
  return m;
}

/// Everything a model consumes, before scaling. fcnn: one feature row per
/// event. cnn: one T x C waveform per event.
struct ModelInputs {
  std::vector<std::string> record_ids;
  std::vector<int> labels;
  std::vector<std::string> input_names;  // feature names or channel names
  Matrix table;                          // fcnn
  std::vector<Matrix> waveforms;         // cnn

  std::size_t size() const { return record_ids.size(); }
};

inline ModelInputs load_inputs(const PipelineConfig& cfg, nn::Architecture arch, const WaveformPrep& prep) {
  const auto& in = detail::require_dir(cfg.data_dir, "data");
  ModelInputs mi;
  if (arch == nn::Architecture::Fcnn) {
    auto t = parse_feature_csv(text::read_file(in / "features.csv"));
    if (t.features.rows == 0) fail(ErrorCode::EmptyInput, "features.csv has no rows");
    mi.record_ids = std::move(t.record_ids);
    mi.labels = std::move(t.labels);
    mi.input_names = std::move(t.names);
    mi.table = std::move(t.features);
    return mi;
  }
  const auto events = detail::read_window_index(in);
  mi.waveforms.resize(events.size());
  std::vector<std::vector<std::string>> channel_names(events.size());
  detail::parallel_for(events.size(), detail::thread_count(cfg, events.size()), [&](std::size_t i, std::size_t) {
    const auto w = preprocess::impute_mean(detail::load_window(in, events[i]));
    mi.waveforms[i] = prepare_waveform(w, prep);
    channel_names[i] = w.channel_names;
  });
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (mi.waveforms[i].rows != mi.waveforms[0].rows || mi.waveforms[i].cols != mi.waveforms[0].cols) {
      fail(ErrorCode::DimensionMismatch, "window '" + events[i].record_id + "' differs in length or channel count");
    }
    mi.record_ids.push_back(events[i].record_id);
    mi.labels.push_back(wfdb::to_int(events[i].label));
  }
  for (std::size_t c = 0; c < mi.waveforms[0].cols; ++c) mi.input_names.push_back("ch" + std::to_string(c));
  return mi;
}

inline preprocess::ScalerParams fit_input_scaler(const ModelInputs& mi, std::span<const std::size_t> rows) {
  if (!mi.waveforms.empty()) {
    const auto& first = mi.waveforms[rows.front()];
    Matrix stacked(0, first.cols);
    for (auto r : rows) {
      stacked.data.insert(stacked.data.end(), mi.waveforms[r].data.begin(), mi.waveforms[r].data.end());
      stacked.rows += mi.waveforms[r].rows;
    }
    return preprocess::fit_scaler(stacked);
  }
  return preprocess::fit_scaler(mi.table, rows);
}

/// Scaled model input for the given events, flattened one event per row.
inline Matrix scaled_rows(const ModelInputs& mi, std::span<const std::size_t> rows,
                          const preprocess::ScalerParams& scaler) {
  if (mi.waveforms.empty()) return preprocess::apply_scaler(select_rows(mi.table, rows), scaler);
  const auto& first = mi.waveforms[rows.front()];
  Matrix out(rows.size(), first.rows * first.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto s = preprocess::apply_scaler(mi.waveforms[rows[i]], scaler);
    std::copy(s.data.begin(), s.data.end(), out.row(i).begin());
  }
  return out;
}

inline nn::Tensor to_tensor(const ModelInputs& mi, Matrix flat) {
  if (mi.waveforms.empty()) return nn::Tensor({flat.rows, flat.cols}, std::move(flat.data));
  const auto& first = mi.waveforms.front();
  return nn::Tensor({flat.rows, first.rows, first.cols}, std::move(flat.data));
}

// ---------------------------------------------------------------- train

inline std::string cmd_train(const PipelineConfig& cfg) {
  validate(cfg);
  const auto& out = detail::require_dir(cfg.out_dir, "output");
  const auto arch = cfg.architecture.value_or(nn::Architecture::Fcnn);
  const WaveformPrep prep{cfg.decimation, cfg.cnn_start_s, cfg.cnn_length_s};
  const auto mi = load_inputs(cfg, arch, prep);

  const auto split = cfg.split_file.empty() ? preprocess::split_dataset(mi.labels, split_seed(cfg))
                                            : preprocess::parse_split(text::read_file(cfg.split_file), mi.record_ids);
  if (split.train.empty() || split.val.empty()) fail(ErrorCode::TooFewSamples, "train and validation splits must be non-empty");

  const auto scaler = fit_input_scaler(mi, split.train);
  Matrix train_x = scaled_rows(mi, split.train, scaler);
  std::vector<int> train_y = select<int>(mi.labels, split.train);
  const Matrix val_x = scaled_rows(mi, split.val, scaler);
  const std::vector<int> val_y = select<int>(mi.labels, split.val);

  std::size_t n_synthetic = 0;
  if (cfg.resample.method != imbalance::Method::None) {
    auto rc = cfg.resample;
    rc.seed = resample_seed(cfg);
    auto rs = imbalance::resample(train_x, train_y, rc);
    n_synthetic = rs.features.rows - rs.n_original;
    train_x = std::move(rs.features);
    train_y = std::move(rs.labels);
  }

  auto hp = cfg.model;
  hp.architecture = arch;
  hp.dropout = cfg.train.dropout_p;
  hp.input_dim = arch == nn::Architecture::Fcnn ? mi.table.cols : mi.waveforms.front().cols;
  auto model = nn::build_model(hp, init_seed(cfg));

  auto tc = cfg.train;
  tc.seed = train_seed(cfg);
  if (cfg.class_weights) tc.class_weights = imbalance::class_weights(train_y);
  const auto history = nn::train(model, to_tensor(mi, std::move(train_x)), train_y, to_tensor(mi, val_x), val_y, tc);

  const auto comment = provenance(cfg, "train");
  std::map<std::string, std::string> meta = {
      {"architecture", nn::to_string(arch)},
      {"config_hash", config_hash(cfg)},
      {"seed", std::to_string(cfg.seed)},
      {"inputs", detail::join(mi.input_names, ',')},
      {"decimation", std::to_string(prep.decimation)},
      {"cnn_start_s", text::format_double(prep.start_s)},
      {"cnn_length_s", text::format_double(prep.length_s)},
      {"best_epoch", std::to_string(history.best_epoch)},
  };
  text::write_file(out / "model.ckpt", nn::save_checkpoint(model, meta));
  text::write_file(out / "scaler.txt", "# " + comment + '\n' + preprocess::format_scaler(scaler));
  text::write_file(out / "split.csv", preprocess::format_split(split, mi.record_ids, comment));
  text::write_file(out / "history.csv", nn::format_history(history, comment));

  const auto& best = history.epochs[history.best_epoch - 1];
  std::string line = "train: " + std::string(nn::to_string(arch)) + " " + std::to_string(model.parameter_count()) +
                     " params, " + std::to_string(history.epochs.size()) + " epochs, best epoch " +
                     std::to_string(history.best_epoch) + " val_auc=" +
                     (std::isnan(best.val_auc) ? std::string("nan") : text::format_double(best.val_auc));
  if (n_synthetic > 0) line += ", " + std::to_string(n_synthetic) + " synthetic rows";
  return line + ", wrote " + (out / "model.ckpt").string();
}

// ---------------------------------------------------------------- evaluate / predict

struct ScoredEvents {
  std::vector<std::string> record_ids;
  std::vector<int> labels;
  std::vector<double> scores;
  std::string split;
  std::string architecture;
};

inline ScoredEvents score_events(const PipelineConfig& cfg, const std::string& default_split) {
  const auto& model_dir = detail::require_dir(cfg.model_dir, "model");
  auto loaded = nn::load_checkpoint(text::read_bytes(model_dir / "model.ckpt"), cfg.architecture);
  auto& meta = loaded.metadata;
  const auto arch = nn::parse_architecture(meta["architecture"]);
  WaveformPrep prep;
  prep.decimation = text::parse_number<std::size_t>(meta["decimation"]).value_or(1);
  prep.start_s = text::parse_number<double>(meta["cnn_start_s"]).value_or(0.0);
  prep.length_s = text::parse_number<double>(meta["cnn_length_s"]).value_or(0.0);
  if (prep.decimation == 0) fail(ErrorCode::CorruptCheckpoint, "checkpoint records a zero decimation");
  const auto mi = load_inputs(cfg, arch, prep);
  if (detail::join(mi.input_names, ',') != meta["inputs"]) {
    fail(ErrorCode::DimensionMismatch, "input columns differ from those the model was trained on");
  }
  const auto scaler = preprocess::parse_scaler(text::read_file(model_dir / "scaler.txt"));

  ScoredEvents out;
  out.split = cfg.eval_split.empty() ? default_split : cfg.eval_split;
  out.architecture = nn::to_string(arch);
  std::vector<std::size_t> rows;
  if (out.split == "all") {
    rows.resize(mi.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
  } else {
    const auto split = preprocess::parse_split(text::read_file(model_dir / "split.csv"), mi.record_ids);
    rows = out.split == "train" ? split.train : out.split == "val" ? split.val : split.test;
  }
  if (rows.empty()) fail(ErrorCode::EmptyInput, "the " + out.split + " split is empty");
  out.scores = nn::predict(loaded.model, to_tensor(mi, scaled_rows(mi, rows, scaler)));
  for (auto r : rows) {
    out.record_ids.push_back(mi.record_ids[r]);
    out.labels.push_back(mi.labels[r]);
  }
  return out;
}

inline std::string cmd_evaluate(const PipelineConfig& cfg) {
  validate(cfg);
  const auto& out = detail::require_dir(cfg.out_dir, "output");
  const auto scored = score_events(cfg, "test");
  const auto report = eval::classification_metrics(scored.scores, scored.labels, cfg.threshold);

  nlohmann::ordered_json j;
  j["config_hash"] = config_hash(cfg);
  j["seed"] = cfg.seed;
  j["architecture"] = scored.architecture;
  j["split"] = scored.split;
  const auto metrics = eval::to_json(report);
  for (const auto& [k, v] : metrics.items()) j[k] = v;
  text::write_file(out / "report.json", j.dump(2) + '\n');

  std::string csv = "# " + provenance(cfg, "evaluate") + "\nrecord_id,score,alert\n";
  for (std::size_t i = 0; i < scored.scores.size(); ++i) {
    const auto d = eval::decide_alert(scored.scores[i], cfg.threshold);
    csv += scored.record_ids[i] + ',' + text::format_double(d.score) + ',' + (d.alert ? "1" : "0") + '\n';
  }
  text::write_file(out / "scores.csv", csv);
  return "evaluate: " + scored.split + " n=" + std::to_string(report.n_samples) +
         " roc_auc=" + text::format_double(report.roc_auc) + " true_alarm_recall=" +
         text::format_double(report.true_alarm.recall) + ", wrote " + (out / "report.json").string();
}

inline std::string cmd_predict(const PipelineConfig& cfg) {
  validate(cfg);
  const auto& out = detail::require_dir(cfg.out_dir, "output");
  const auto scored = score_events(cfg, "all");
  std::string csv = "# " + provenance(cfg, "predict") + "\nrecord_id,score,alert,threshold\n";
  std::size_t n_alert = 0;
  for (std::size_t i = 0; i < scored.scores.size(); ++i) {
    const auto d = eval::decide_alert(scored.scores[i], cfg.threshold);
    n_alert += d.alert ? 1 : 0;
    csv += scored.record_ids[i] + ',' + text::format_double(d.score) + ',' + (d.alert ? "1" : "0") + ',' +
           text::format_double(d.threshold) + '\n';
  }
  text::write_file(out / "alerts.csv", csv);
  return "predict: " + std::to_string(n_alert) + " of " + std::to_string(scored.scores.size()) +
         " events alert at threshold " + text::format_double(cfg.threshold) + ", wrote " + (out / "alerts.csv").string();
}

}  // namespace vtac::pipeline

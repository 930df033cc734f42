// vtac: command-line front end for the alarm classification pipeline.
//
//   vtac synth     --out RAW [--events N --separability S ...]
//   vtac ingest    --data RAW --out WIN
//   vtac featurize --data WIN --out FEAT
//   vtac train     --data FEAT --out MODEL [--arch fcnn|cnn --resample smote --ratio 0.75]
//   vtac evaluate  --data FEAT --model MODEL --out EVAL
//   vtac predict   --data FEAT --model MODEL --out PRED
//
// Every option may also come from an INI/TOML file given with --config;
// flags on the command line win over the file.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "vtac/pipeline.hpp"

namespace {

using vtac::pipeline::PipelineConfig;

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  for (auto tok : vtac::text::split(s, ',')) {
    if (vtac::text::trim(tok).empty()) continue;
    auto v = vtac::text::parse_number<std::size_t>(tok);
    if (!v || *v == 0) vtac::fail(vtac::ErrorCode::ConfigError, "--hidden expects positive integers, e.g. 256,128");
    out.push_back(*v);
  }
  return out;
}

void print_error(const std::string& code, const std::string& message) {
  std::cerr << "error: code=" << code << " message=" << message << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ventricular tachycardia alarm classification pipeline"};
  app.require_subcommand(1, 1);
  app.set_config("--config", "", "INI/TOML file with option defaults");

  PipelineConfig cfg;
  std::string arch, resample = "none", format = "16", psd_window = "hann", coherence = "pair", hidden;

  app.add_option("--data", cfg.data_dir, "Input directory of the stage");
  app.add_option("--out", cfg.out_dir, "Output directory")->capture_default_str();
  app.add_option("--model", cfg.model_dir, "Directory holding model.ckpt (evaluate, predict)");
  app.add_option("--split-file", cfg.split_file, "External record_id,split assignment");
  app.add_option("--seed", cfg.seed, "Run seed")->capture_default_str();
  app.add_option("--threads", cfg.threads, "Worker threads, 0 = all cores")->capture_default_str();

  app.add_option("--events", cfg.synth.n_events, "synth: number of alarm events")->capture_default_str();
  app.add_option("--class-ratio", cfg.synth.class_ratio, "synth: fraction of true alarms")->capture_default_str();
  app.add_option("--fs", cfg.synth.fs, "synth: sampling frequency (Hz)")->capture_default_str();
  app.add_option("--separability", cfg.synth.separability, "synth: class effect size")->capture_default_str();
  app.add_option("--format", format, "synth: WFDB storage format")->check(CLI::IsMember({"16", "212"}))->capture_default_str();

  app.add_option("--alarm-file", cfg.alarm_file, "ingest: alarm index inside --data")->capture_default_str();
  app.add_option("--channels", cfg.n_channels, "ingest: keep the first N channels (0 = all)")->capture_default_str();

  app.add_option("--segment-seconds", cfg.segment_seconds, "Welch segment length (s)")->capture_default_str();
  app.add_option("--overlap", cfg.overlap, "Welch segment overlap fraction")->capture_default_str();
  app.add_option("--psd-window", psd_window, "Welch taper")->check(CLI::IsMember({"hann", "rect"}))->capture_default_str();
  app.add_option("--wavelet-scales", cfg.wavelet_scales, "Morlet scale count")->capture_default_str();
  app.add_option("--wavelet-fmin", cfg.wavelet_f_lo, "Lowest Morlet pseudo-frequency (Hz)")->capture_default_str();
  app.add_option("--wavelet-fmax", cfg.wavelet_f_hi, "Highest Morlet pseudo-frequency (Hz)")->capture_default_str();
  app.add_option("--omega0", cfg.omega0, "Morlet centre frequency")->capture_default_str();
  app.add_option("--coherence", coherence, "Coherence per channel pair or one global mean")
      ->check(CLI::IsMember({"pair", "global"}))
      ->capture_default_str();
  app.add_option("--analysis-start", cfg.feature_options.analysis_start_s, "Feature analysis offset into the window (s)");
  app.add_option("--analysis-length", cfg.feature_options.analysis_length_s, "Feature analysis length (s), 0 = rest");

  app.add_option("--arch", arch, "Model architecture")->check(CLI::IsMember({"cnn", "fcnn"}));
  app.add_option("--hidden", hidden, "Hidden layer widths, comma separated");
  app.add_option("--filters", cfg.model.conv_filters, "cnn: convolution filters")->capture_default_str();
  app.add_option("--filter-size", cfg.model.filter_size, "cnn: convolution width (odd)")->capture_default_str();
  app.add_option("--heads", cfg.model.heads, "cnn: attention heads")->capture_default_str();
  app.add_option("--decimation", cfg.decimation, "cnn: block-mean decimation factor")->capture_default_str();
  app.add_option("--cnn-start", cfg.cnn_start_s, "cnn: crop offset into the window (s)");
  app.add_option("--cnn-length", cfg.cnn_length_s, "cnn: crop length (s), 0 = rest");
  app.add_option("--lr", cfg.train.learning_rate, "Adam learning rate")->capture_default_str();
  app.add_option("--batch", cfg.train.batch_size, "Mini-batch size")->capture_default_str();
  app.add_option("--epochs", cfg.train.max_epochs, "Maximum epochs")->capture_default_str();
  app.add_option("--patience", cfg.train.patience, "Early-stopping patience (epochs)")->capture_default_str();
  app.add_option("--dropout", cfg.train.dropout_p, "Dropout rate")->capture_default_str();
  app.add_option("--resample", resample, "Training-set oversampling")
      ->check(CLI::IsMember({"none", "smote", "adasyn"}))
      ->capture_default_str();
  app.add_option("--ratio", cfg.resample.ratio, "Target minority/majority ratio")->capture_default_str();
  app.add_option("--k", cfg.resample.k_neighbors, "Neighbours for smote/adasyn")->capture_default_str();
  app.add_flag("--class-weights", cfg.class_weights, "Weight the loss by inverse class frequency");

  app.add_option("--threshold", cfg.threshold, "Alert threshold on the score")->capture_default_str();
  app.add_option("--split", cfg.eval_split, "evaluate/predict: train, val, test or all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));

  using Command = std::string (*)(const PipelineConfig&);
  const std::pair<const char*, Command> commands[] = {
      {"synth", vtac::pipeline::cmd_synth},         {"ingest", vtac::pipeline::cmd_ingest},
      {"featurize", vtac::pipeline::cmd_featurize}, {"train", vtac::pipeline::cmd_train},
      {"evaluate", vtac::pipeline::cmd_evaluate},   {"predict", vtac::pipeline::cmd_predict},
  };
  const char* help[] = {"Generate a synthetic WFDB corpus",  "Cut 360 s alarm windows from WFDB records",
                        "Extract per-window feature vectors", "Train a model",
                        "Score a split and write a report",   "Emit alert decisions per event"};
  std::vector<std::pair<CLI::App*, Command>> subs;
  for (std::size_t i = 0; i < std::size(commands); ++i) {
    auto* sub = app.add_subcommand(commands[i].first, help[i]);
    sub->fallthrough();
    subs.emplace_back(sub, commands[i].second);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("ConfigError", e.what());
    return 2;
  }

  try {
    if (!arch.empty()) cfg.architecture = vtac::nn::parse_architecture(arch);
    cfg.resample.method = vtac::imbalance::parse_method(resample);
    cfg.synth_format = format == "212" ? vtac::wfdb::StorageFormat::Fmt212 : vtac::wfdb::StorageFormat::Fmt16;
    cfg.psd_window = psd_window == "rect" ? vtac::features::WindowKind::Rectangular : vtac::features::WindowKind::Hann;
    cfg.feature_options.coherence =
        coherence == "global" ? vtac::features::CoherenceMode::Global : vtac::features::CoherenceMode::PerPair;
    cfg.model.hidden = parse_sizes(hidden);
    for (auto& [sub, run] : subs) {
      if (sub->parsed()) std::cout << run(cfg) << '\n';
    }
  } catch (const vtac::Error& e) {
    print_error(vtac::to_string(e.code()), e.message());
    return e.code() == vtac::ErrorCode::ConfigError ? 2 : 1;
  } catch (const std::filesystem::filesystem_error& e) {
    print_error("IoError", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("Internal", e.what());
    return 1;
  }
  return 0;
}

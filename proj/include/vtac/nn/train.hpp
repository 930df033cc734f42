#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vtac/error.hpp"
#include "vtac/eval.hpp"
#include "vtac/imbalance.hpp"
#include "vtac/nn/model.hpp"
#include "vtac/rng.hpp"
#include "vtac/text.hpp"

namespace vtac::nn {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  double dropout_p = 0.3;
  std::size_t patience = 10;  // epochs without validation ROC-AUC improvement
  std::uint64_t seed = 0;
  std::optional<imbalance::ClassWeights> class_weights;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_auc = 0.0;  // NaN when the validation split holds a single class
  double val_loss = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  double best_val_loss = std::numeric_limits<double>::infinity();
  bool stopped_early = false;
};

namespace detail {

/// Consecutive batches of a permutation. A trailing batch of one sample is
/// folded into the previous batch because train-mode batchnorm needs two.
inline std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order, std::size_t size) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += size) {
    const std::size_t end = std::min(order.size(), start + size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

inline bool has_both_classes(std::span<const int> y) {
  bool pos = false, neg = false;
  for (int v : y) (v == 1 ? pos : neg) = true;
  return pos && neg;
}

}  // namespace detail

/// Mini-batch Adam on weighted binary cross-entropy. After every epoch the
/// validation ROC-AUC is measured; the best-scoring parameters are restored at
/// the end and training stops after `patience` epochs without improvement.
/// Shuffling and dropout are seeded, so the whole run is a deterministic
/// function of (model, data, config).
inline TrainHistory train(Model& model, const Tensor& train_x, std::span<const int> train_y, const Tensor& val_x,
                          std::span<const int> val_y, const TrainConfig& cfg) {
  if (train_x.rank() == 0 || train_x.dim(0) == 0 || val_x.rank() == 0 || val_x.dim(0) == 0) {
    fail(ErrorCode::EmptyInput, "training and validation splits must be non-empty");
  }
  if (train_x.dim(0) != train_y.size() || val_x.dim(0) != val_y.size()) {
    fail(ErrorCode::ShapeMismatch, "inputs and labels differ in count");
  }
  if (!detail::has_both_classes(train_y)) fail(ErrorCode::SingleClass, "training split needs both classes");
  if (cfg.batch_size < 2) fail(ErrorCode::InvalidConfig, "batch size must be at least 2");
  if (!(cfg.learning_rate > 0.0)) fail(ErrorCode::InvalidConfig, "learning rate must be positive");

  model.set_dropout(cfg.dropout_p);
  model.reseed_dropout(derive_seed(cfg.seed, 0xD50));
  model.reset_optimizer();
  const AdamConfig adam{cfg.learning_rate};
  const bool val_auc_defined = detail::has_both_classes(val_y);

  TrainHistory history;
  auto best = model.snapshot();
  std::size_t since_best = 0;
  std::vector<std::size_t> order(train_x.dim(0));
  std::vector<double> weights;
  std::vector<int> labels;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffler(derive_seed(cfg.seed, epoch));
    shuffler.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    double weight_sum = 0.0;
    for (const auto& batch : detail::make_batches(order, cfg.batch_size)) {
      labels.clear();
      weights.clear();
      for (auto i : batch) {
        labels.push_back(train_y[i]);
        weights.push_back(cfg.class_weights ? (*cfg.class_weights)(train_y[i]) : 1.0);
      }
      model.set_mode(Mode::Train);
      model.zero_grad();
      const auto logits = model.forward(gather(train_x, batch));
      const auto loss = weighted_bce(logits.data, labels, weights);
      if (!std::isfinite(loss.loss)) {
        fail(ErrorCode::DivergedLoss, "training loss became non-finite at epoch " + std::to_string(epoch));
      }
      model.backward(Tensor({batch.size(), 1}, loss.grad));
      model.adam_update(adam);
      const double w = std::accumulate(weights.begin(), weights.end(), 0.0);
      loss_sum += loss.loss * w;
      weight_sum += w;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / weight_sum;
    const auto val_scores = predict(model, val_x);
    std::vector<double> val_logits(val_scores.size());
    for (std::size_t i = 0; i < val_scores.size(); ++i) {
      val_logits[i] = std::log(val_scores[i]) - std::log1p(-val_scores[i]);
    }
    rec.val_loss = weighted_bce(val_logits, val_y).loss;
    double score;
    if (val_auc_defined) {
      rec.val_auc = eval::roc_auc(val_scores, val_y);
      score = rec.val_auc;
    } else {
      rec.val_auc = std::numeric_limits<double>::quiet_NaN();
      score = -rec.val_loss;
    }
    history.epochs.push_back(rec);

    // A small validation split saturates ROC-AUC early; equal AUC with lower
    // loss still counts as progress.
    if (score > history.best_score || (score == history.best_score && rec.val_loss < history.best_val_loss)) {
      history.best_score = score;
      history.best_val_loss = rec.val_loss;
      history.best_epoch = epoch;
      best = model.snapshot();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      history.stopped_early = true;
      break;
    }
  }
  model.restore(best);
  model.set_mode(Mode::Infer);
  return history;
}

inline std::string format_history(const TrainHistory& h, std::string_view comment = {}) {
  std::string out;
  if (!comment.empty()) out += "# " + std::string(comment) + '\n';
  out += "epoch,train_loss,val_auc,val_loss\n";
  for (const auto& e : h.epochs) {
    out += std::to_string(e.epoch) + ',' + text::format_double(e.train_loss) + ',' +
           (std::isnan(e.val_auc) ? std::string("nan") : text::format_double(e.val_auc)) + ',' +
           text::format_double(e.val_loss) + '\n';
  }
  return out;
}

}  // namespace vtac::nn

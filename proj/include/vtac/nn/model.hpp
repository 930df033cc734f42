#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vtac/error.hpp"
#include "vtac/nn/adam.hpp"
#include "vtac/nn/layers.hpp"
#include "vtac/nn/loss.hpp"
#include "vtac/nn/tensor.hpp"
#include "vtac/rng.hpp"

namespace vtac::nn {

enum class Architecture { Fcnn, Cnn1dAttention };

inline const char* to_string(Architecture a) { return a == Architecture::Fcnn ? "fcnn" : "cnn"; }

inline Architecture parse_architecture(std::string_view s) {
  if (s == "fcnn") return Architecture::Fcnn;
  if (s == "cnn") return Architecture::Cnn1dAttention;
  fail(ErrorCode::ConfigError, "architecture must be cnn or fcnn");
}

struct ModelHyperparams {
  Architecture architecture = Architecture::Fcnn;
  std::size_t input_dim = 0;  // feature count D (fcnn) or channel count C (cnn)
  std::size_t conv_filters = 32;
  std::size_t filter_size = 7;
  std::size_t heads = 4;
  std::vector<std::size_t> hidden;  // empty: {256, 192, 128, 64} (fcnn), {256, 128} (cnn)
  double dropout = 0.3;

  std::vector<std::size_t> hidden_sizes() const {
    if (!hidden.empty()) return hidden;
    if (architecture == Architecture::Fcnn) return {256, 192, 128, 64};
    return {256, 128};
  }
};

/// Ordered layer stack ending in one logit. The sigmoid is applied by
/// predict(); training consumes logits directly.
class Model {
 public:
  Model(ModelHyperparams hp, std::vector<std::unique_ptr<Layer>> layers)
      : hp_(std::move(hp)), layers_(std::move(layers)) {}

  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  Architecture architecture() const { return hp_.architecture; }
  const ModelHyperparams& hyperparams() const { return hp_; }
  Mode mode() const { return mode_; }
  void set_mode(Mode m) { mode_ = m; }

  std::size_t layer_count() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }

  Dense& output_layer() { return static_cast<Dense&>(*layers_.back()); }

  Tensor forward(const Tensor& x) {
    if (hp_.architecture == Architecture::Fcnn) {
      require_rank(x, 2, "fcnn input");
    } else {
      require_rank(x, 3, "cnn input");
    }
    Tensor h = x;
    for (auto& l : layers_) h = l->forward(h, mode_);
    return h;
  }

  Tensor backward(const Tensor& grad_logits) {
    Tensor g = grad_logits;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

  std::vector<ParamRef> params() {
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      for (auto p : layers_[i]->params()) {
        p.name = "layer" + std::to_string(i) + "." + layers_[i]->kind() + "." + p.name;
        out.push_back(p);
      }
    }
    return out;
  }

  std::vector<BufferRef> buffers() {
    std::vector<BufferRef> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      for (auto b : layers_[i]->buffers()) {
        b.name = "layer" + std::to_string(i) + "." + layers_[i]->kind() + "." + b.name;
        out.push_back(b);
      }
    }
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto& p : params()) n += p.value->size();
    return n;
  }

  void zero_grad() {
    for (auto& l : layers_) l->zero_grad();
  }

  void set_dropout(double p) {
    for (auto& l : layers_) {
      if (auto* d = dynamic_cast<Dropout*>(l.get())) d->set_rate(p);
    }
  }

  void reseed_dropout(std::uint64_t seed) {
    std::uint64_t i = 0;
    for (auto& l : layers_) {
      if (auto* d = dynamic_cast<Dropout*>(l.get())) d->reseed(derive_seed(seed, 1000 + i++));
    }
  }

  void adam_update(const AdamConfig& cfg) {
    auto ps = params();
    if (moments_.size() != ps.size()) moments_.assign(ps.size(), AdamMoments{});
    ++step_;
    for (std::size_t i = 0; i < ps.size(); ++i) adam_step(*ps[i].value, *ps[i].grad, moments_[i], step_, cfg);
  }

  void reset_optimizer() {
    moments_.clear();
    step_ = 0;
  }

  std::uint64_t optimizer_step() const { return step_; }

  /// Copy of every parameter and running statistic, in params()/buffers() order.
  std::vector<std::vector<double>> snapshot() {
    std::vector<std::vector<double>> s;
    for (auto& p : params()) s.push_back(*p.value);
    for (auto& b : buffers()) s.push_back(*b.value);
    return s;
  }

  void restore(const std::vector<std::vector<double>>& s) {
    std::size_t i = 0;
    for (auto& p : params()) *p.value = s.at(i++);
    for (auto& b : buffers()) *b.value = s.at(i++);
  }

 private:
  ModelHyperparams hp_;
  std::vector<std::unique_ptr<Layer>> layers_;
  Mode mode_ = Mode::Train;
  std::vector<AdamMoments> moments_;
  std::uint64_t step_ = 0;
};

/// Assemble and initialize one of the two architectures.
///
///   fcnn: [Dense -> BatchNorm -> ReLU -> Dropout] x hidden -> Dense(1)
///   cnn:  Conv1D(K, F) -> BatchNorm -> ReLU -> MaxPool(2) -> MultiHeadAttention(H)
///         -> GlobalAvgPool -> [Dense -> ReLU -> Dropout] x hidden -> Dense(1)
///
/// Weights are He-normal from Rng(seed), biases zero, dropout streams derived
/// from the same seed.
inline Model build_model(const ModelHyperparams& hp, std::uint64_t seed) {
  if (hp.input_dim == 0) fail(ErrorCode::InvalidHyperparams, "input dimension must be positive");
  if (!(hp.dropout >= 0.0 && hp.dropout < 1.0)) fail(ErrorCode::InvalidHyperparams, "dropout must lie in [0, 1)");
  const auto hidden = hp.hidden_sizes();
  for (auto h : hidden) {
    if (h == 0) fail(ErrorCode::InvalidHyperparams, "hidden layer sizes must be positive");
  }

  Rng rng(seed);
  std::vector<std::unique_ptr<Layer>> layers;
  std::uint64_t dropout_index = 0;
  auto add_dropout = [&] {
    layers.push_back(std::make_unique<Dropout>(hp.dropout, derive_seed(seed, 1000 + dropout_index++)));
  };
  auto add_dense = [&](std::size_t in, std::size_t out) {
    auto d = std::make_unique<Dense>(in, out);
    d->init(rng);
    layers.push_back(std::move(d));
  };

  std::size_t width = hp.input_dim;
  if (hp.architecture == Architecture::Fcnn) {
    for (auto h : hidden) {
      add_dense(width, h);
      layers.push_back(std::make_unique<BatchNorm>(h));
      layers.push_back(std::make_unique<Relu>());
      add_dropout();
      width = h;
    }
  } else {
    if (hp.conv_filters == 0 || hp.filter_size == 0 || hp.filter_size % 2 == 0) {
      fail(ErrorCode::InvalidHyperparams, "conv filters must be >= 1 and the filter size odd");
    }
    if (hp.heads == 0 || hp.conv_filters % hp.heads != 0) {
      fail(ErrorCode::InvalidHyperparams, "conv filter count must be divisible by the head count");
    }
    auto conv = std::make_unique<Conv1d>(hp.input_dim, hp.conv_filters, hp.filter_size);
    conv->init(rng);
    layers.push_back(std::move(conv));
    layers.push_back(std::make_unique<BatchNorm>(hp.conv_filters));
    layers.push_back(std::make_unique<Relu>());
    layers.push_back(std::make_unique<MaxPool1d>());
    auto mha = std::make_unique<MultiHeadAttention>(hp.conv_filters, hp.heads);
    mha->init(rng);
    layers.push_back(std::move(mha));
    layers.push_back(std::make_unique<GlobalAvgPool>());
    width = hp.conv_filters;
    for (auto h : hidden) {
      add_dense(width, h);
      layers.push_back(std::make_unique<Relu>());
      add_dropout();
      width = h;
    }
  }
  add_dense(width, 1);
  return Model(hp, std::move(layers));
}

/// Probabilities in (0, 1). Switches the model to inference mode.
inline std::vector<double> predict(Model& model, const Tensor& inputs, std::size_t batch_size = 256) {
  model.set_mode(Mode::Infer);
  const std::size_t n = inputs.dim(0);
  std::vector<double> out;
  out.reserve(n);
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < n; start += batch_size) {
    rows.clear();
    for (std::size_t i = start; i < std::min(n, start + batch_size); ++i) rows.push_back(i);
    const auto logits = model.forward(gather(inputs, rows));
    for (double z : logits.data) {
      // Keep saturated logits strictly inside (0, 1).
      out.push_back(std::clamp(sigmoid(z), std::numeric_limits<double>::denorm_min(), 1.0 - 0x1.0p-53));
    }
  }
  return out;
}

}  // namespace vtac::nn

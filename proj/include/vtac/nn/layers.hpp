#pragma once

// Differentiable layers with hand-written backward passes. Each forward call
// caches what its backward needs; backward accumulates parameter gradients
// and returns the gradient with respect to the layer input.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "vtac/error.hpp"
#include "vtac/nn/tensor.hpp"
#include "vtac/rng.hpp"

namespace vtac::nn {

enum class Mode { Train, Infer };

struct ParamRef {
  std::string name;
  std::vector<double>* value;
  std::vector<double>* grad;
};

struct BufferRef {
  std::string name;
  std::vector<double>* value;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string kind() const = 0;
  virtual Tensor forward(const Tensor& x, Mode mode) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual std::vector<ParamRef> params() { return {}; }
  virtual std::vector<BufferRef> buffers() { return {}; }

  void zero_grad() {
    for (auto& p : params()) std::fill(p.grad->begin(), p.grad->end(), 0.0);
  }
};

/// He (Kaiming) normal initialization: N(0, 2 / fan_in).
inline void he_init(std::vector<double>& w, std::size_t fan_in, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : w) v = rng.normal(0.0, stddev);
}

/// y = W x + b, W stored out x in.
class Dense final : public Layer {
 public:
  Dense(std::size_t in, std::size_t out) : in_(in), out_(out), w_(in * out, 0.0), b_(out, 0.0), gw_(in * out), gb_(out) {}

  std::string kind() const override { return "dense"; }
  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  std::vector<double>& weights() { return w_; }
  std::vector<double>& bias() { return b_; }

  void init(Rng& rng) { he_init(w_, in_, rng); }

  Tensor forward(const Tensor& x, Mode) override {
    require_rank(x, 2, "dense");
    if (x.dim(1) != in_) fail(ErrorCode::ShapeMismatch, "dense layer expects " + std::to_string(in_) + " inputs");
    x_ = x;
    const std::size_t batch = x.dim(0);
    Tensor y({batch, out_});
    for (std::size_t b = 0; b < batch; ++b) {
      const double* xb = x.data.data() + b * in_;
      double* yb = y.data.data() + b * out_;
      for (std::size_t o = 0; o < out_; ++o) yb[o] = b_[o] + dot(w_.data() + o * in_, xb, in_);
    }
    return y;
  }

  Tensor backward(const Tensor& g) override {
    const std::size_t batch = x_.dim(0);
    Tensor dx({batch, in_});
    for (std::size_t b = 0; b < batch; ++b) {
      const double* xb = x_.data.data() + b * in_;
      const double* gb = g.data.data() + b * out_;
      double* dxb = dx.data.data() + b * in_;
      for (std::size_t o = 0; o < out_; ++o) {
        const double go = gb[o];
        if (go == 0.0) continue;
        gb_[o] += go;
        axpy(go, xb, gw_.data() + o * in_, in_);
        axpy(go, w_.data() + o * in_, dxb, in_);
      }
    }
    return dx;
  }

  std::vector<ParamRef> params() override { return {{"W", &w_, &gw_}, {"b", &b_, &gb_}}; }

 private:
  std::size_t in_, out_;
  std::vector<double> w_, b_, gw_, gb_;
  Tensor x_;
};

/// Cross-correlation over time with "same" zero padding:
/// y[t,k] = b[k] + sum_{f,c} W[k,f,c] x[t + f - (F-1)/2, c].
class Conv1d final : public Layer {
 public:
  Conv1d(std::size_t in_channels, std::size_t filters, std::size_t width)
      : c_(in_channels), k_(filters), f_(width), w_(filters * width * in_channels, 0.0), b_(filters, 0.0),
        gw_(w_.size()), gb_(filters) {
    if (filters == 0 || width == 0 || width % 2 == 0) {
      fail(ErrorCode::InvalidHyperparams, "conv filters must be >= 1 and the filter size odd");
    }
  }

  std::string kind() const override { return "conv1d"; }
  std::vector<double>& weights() { return w_; }
  std::vector<double>& bias() { return b_; }
  void init(Rng& rng) { he_init(w_, f_ * c_, rng); }

  Tensor forward(const Tensor& x, Mode) override {
    require_rank(x, 3, "conv1d");
    if (x.dim(2) != c_) fail(ErrorCode::ShapeMismatch, "conv1d expects " + std::to_string(c_) + " channels");
    x_ = x;
    const std::size_t batch = x.dim(0);
    const std::size_t t_len = x.dim(1);
    const auto pad = static_cast<std::ptrdiff_t>((f_ - 1) / 2);
    Tensor y({batch, t_len, k_});
    for (std::size_t b = 0; b < batch; ++b) {
      const double* xb = x.data.data() + b * t_len * c_;
      double* yb = y.data.data() + b * t_len * k_;
      for (std::size_t t = 0; t < t_len; ++t) {
        double* yt = yb + t * k_;
        for (std::size_t k = 0; k < k_; ++k) yt[k] = b_[k];
        for (std::size_t f = 0; f < f_; ++f) {
          const auto src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(f) - pad;
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(t_len)) continue;
          const double* xs = xb + static_cast<std::size_t>(src) * c_;
          for (std::size_t k = 0; k < k_; ++k) yt[k] += dot(w_.data() + (k * f_ + f) * c_, xs, c_);
        }
      }
    }
    return y;
  }

  Tensor backward(const Tensor& g) override {
    const std::size_t batch = x_.dim(0);
    const std::size_t t_len = x_.dim(1);
    const auto pad = static_cast<std::ptrdiff_t>((f_ - 1) / 2);
    Tensor dx({batch, t_len, c_});
    for (std::size_t b = 0; b < batch; ++b) {
      const double* xb = x_.data.data() + b * t_len * c_;
      const double* gbt = g.data.data() + b * t_len * k_;
      double* dxb = dx.data.data() + b * t_len * c_;
      for (std::size_t t = 0; t < t_len; ++t) {
        const double* gt = gbt + t * k_;
        for (std::size_t k = 0; k < k_; ++k) gb_[k] += gt[k];
        for (std::size_t f = 0; f < f_; ++f) {
          const auto src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(f) - pad;
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(t_len)) continue;
          const double* xs = xb + static_cast<std::size_t>(src) * c_;
          double* dxs = dxb + static_cast<std::size_t>(src) * c_;
          for (std::size_t k = 0; k < k_; ++k) {
            const double gk = gt[k];
            axpy(gk, xs, gw_.data() + (k * f_ + f) * c_, c_);
            axpy(gk, w_.data() + (k * f_ + f) * c_, dxs, c_);
          }
        }
      }
    }
    return dx;
  }

  std::vector<ParamRef> params() override { return {{"W", &w_, &gw_}, {"b", &b_, &gb_}}; }

 private:
  std::size_t c_, k_, f_;
  std::vector<double> w_, b_, gw_, gb_;
  Tensor x_;
};

/// Normalizes each feature (last axis) over every other axis: the batch for
/// rank-2 input, batch and time for rank-3 input.
class BatchNorm final : public Layer {
 public:
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.9;

  explicit BatchNorm(std::size_t features)
      : n_(features), gamma_(features, 1.0), beta_(features, 0.0), g_gamma_(features), g_beta_(features),
        running_mean_(features, 0.0), running_var_(features, 1.0) {}

  std::string kind() const override { return "batchnorm"; }
  std::vector<double>& gamma() { return gamma_; }
  std::vector<double>& beta() { return beta_; }
  std::vector<double>& running_mean() { return running_mean_; }
  std::vector<double>& running_var() { return running_var_; }

  Tensor forward(const Tensor& x, Mode mode) override {
    if (x.rank() < 2 || x.shape.back() != n_) fail(ErrorCode::ShapeMismatch, "batchnorm feature count mismatch");
    const std::size_t rows = x.size() / n_;
    mode_ = mode;
    Tensor y(x.shape);
    if (mode == Mode::Infer) {
      inv_std_.resize(n_);
      for (std::size_t j = 0; j < n_; ++j) inv_std_[j] = 1.0 / std::sqrt(running_var_[j] + kEpsilon);
      x_hat_ = Tensor(x.shape);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < n_; ++j) {
          const double h = (x.data[r * n_ + j] - running_mean_[j]) * inv_std_[j];
          x_hat_.data[r * n_ + j] = h;
          y.data[r * n_ + j] = gamma_[j] * h + beta_[j];
        }
      }
      return y;
    }
    if (rows < 2) fail(ErrorCode::BatchTooSmall, "train-mode batchnorm needs at least 2 values per feature");

    std::vector<double> mean(n_, 0.0), var(n_, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < n_; ++j) mean[j] += x.data[r * n_ + j];
    }
    for (auto& m : mean) m /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < n_; ++j) {
        const double d = x.data[r * n_ + j] - mean[j];
        var[j] += d * d;
      }
    }
    for (auto& v : var) v /= static_cast<double>(rows);

    inv_std_.resize(n_);
    for (std::size_t j = 0; j < n_; ++j) inv_std_[j] = 1.0 / std::sqrt(var[j] + kEpsilon);
    x_hat_ = Tensor(x.shape);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < n_; ++j) {
        const double h = (x.data[r * n_ + j] - mean[j]) * inv_std_[j];
        x_hat_.data[r * n_ + j] = h;
        y.data[r * n_ + j] = gamma_[j] * h + beta_[j];
      }
    }
    for (std::size_t j = 0; j < n_; ++j) {
      running_mean_[j] = kMomentum * running_mean_[j] + (1.0 - kMomentum) * mean[j];
      running_var_[j] = kMomentum * running_var_[j] + (1.0 - kMomentum) * var[j];
    }
    return y;
  }

  Tensor backward(const Tensor& g) override {
    const std::size_t rows = g.size() / n_;
    Tensor dx(g.shape);
    if (mode_ == Mode::Infer) {
      // Running statistics are constants here.
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < n_; ++j) {
          const double gv = g.data[r * n_ + j];
          g_beta_[j] += gv;
          g_gamma_[j] += gv * x_hat_.data[r * n_ + j];
          dx.data[r * n_ + j] = gv * gamma_[j] * inv_std_[j];
        }
      }
      return dx;
    }
    // dx = inv_std / N * (N dxh - sum(dxh) - xh * sum(dxh * xh)), dxh = g * gamma
    std::vector<double> sum_g(n_, 0.0), sum_g_xh(n_, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < n_; ++j) {
        const double gv = g.data[r * n_ + j];
        sum_g[j] += gv;
        sum_g_xh[j] += gv * x_hat_.data[r * n_ + j];
      }
    }
    const auto n = static_cast<double>(rows);
    for (std::size_t j = 0; j < n_; ++j) {
      g_beta_[j] += sum_g[j];
      g_gamma_[j] += sum_g_xh[j];
    }
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < n_; ++j) {
        const double xh = x_hat_.data[r * n_ + j];
        dx.data[r * n_ + j] =
            gamma_[j] * inv_std_[j] / n * (n * g.data[r * n_ + j] - sum_g[j] - xh * sum_g_xh[j]);
      }
    }
    return dx;
  }

  std::vector<ParamRef> params() override { return {{"gamma", &gamma_, &g_gamma_}, {"beta", &beta_, &g_beta_}}; }
  std::vector<BufferRef> buffers() override {
    return {{"running_mean", &running_mean_}, {"running_var", &running_var_}};
  }

 private:
  std::size_t n_;
  std::vector<double> gamma_, beta_, g_gamma_, g_beta_, running_mean_, running_var_;
  std::vector<double> inv_std_;
  Tensor x_hat_;
  Mode mode_ = Mode::Train;
};

class Relu final : public Layer {
 public:
  std::string kind() const override { return "relu"; }

  Tensor forward(const Tensor& x, Mode) override {
    Tensor y = x;
    mask_.assign(x.size(), 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y.data[i] > 0.0) {
        mask_[i] = 1;
      } else if (!std::isnan(y.data[i])) {  // NaN passes through so divergence stays visible
        y.data[i] = 0.0;
      }
    }
    return y;
  }

  Tensor backward(const Tensor& g) override {
    Tensor dx = g;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (!mask_[i]) dx.data[i] = 0.0;
    }
    return dx;
  }

 private:
  std::vector<std::uint8_t> mask_;
};

/// Non-overlapping max over pairs of time steps. An odd trailing step is
/// dropped; ties route the gradient to the earlier step.
class MaxPool1d final : public Layer {
 public:
  std::string kind() const override { return "maxpool1d"; }

  Tensor forward(const Tensor& x, Mode) override {
    require_rank(x, 3, "maxpool1d");
    if (x.dim(1) < 2) fail(ErrorCode::ShapeMismatch, "maxpool1d needs at least 2 time steps");
    in_shape_ = x.shape;
    const std::size_t batch = x.dim(0), t_in = x.dim(1), ch = x.dim(2), t_out = t_in / 2;
    Tensor y({batch, t_out, ch});
    argmax_.assign(y.size(), 0);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t t = 0; t < t_out; ++t) {
        for (std::size_t c = 0; c < ch; ++c) {
          const std::size_t i0 = (b * t_in + 2 * t) * ch + c;
          const std::size_t i1 = i0 + ch;
          const std::size_t o = (b * t_out + t) * ch + c;
          const bool second = x.data[i1] > x.data[i0];
          y.data[o] = second ? x.data[i1] : x.data[i0];
          argmax_[o] = second ? i1 : i0;
        }
      }
    }
    return y;
  }

  Tensor backward(const Tensor& g) override {
    Tensor dx(in_shape_);
    for (std::size_t o = 0; o < g.size(); ++o) dx.data[argmax_[o]] += g.data[o];
    return dx;
  }

 private:
  std::vector<std::size_t> in_shape_;
  std::vector<std::size_t> argmax_;
};

/// Mean over the time axis: (B, T, K) -> (B, K).
class GlobalAvgPool final : public Layer {
 public:
  std::string kind() const override { return "global_avg_pool"; }

  Tensor forward(const Tensor& x, Mode) override {
    require_rank(x, 3, "global_avg_pool");
    if (x.dim(1) == 0) fail(ErrorCode::ShapeMismatch, "global_avg_pool needs at least 1 time step");
    in_shape_ = x.shape;
    const std::size_t batch = x.dim(0), t_len = x.dim(1), ch = x.dim(2);
    Tensor y({batch, ch});
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t t = 0; t < t_len; ++t) {
        axpy(1.0, x.data.data() + (b * t_len + t) * ch, y.data.data() + b * ch, ch);
      }
    }
    const double inv = 1.0 / static_cast<double>(t_len);
    for (auto& v : y.data) v *= inv;
    return y;
  }

  Tensor backward(const Tensor& g) override {
    const std::size_t batch = in_shape_[0], t_len = in_shape_[1], ch = in_shape_[2];
    Tensor dx(in_shape_);
    const double inv = 1.0 / static_cast<double>(t_len);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t t = 0; t < t_len; ++t) {
        for (std::size_t c = 0; c < ch; ++c) dx.data[(b * t_len + t) * ch + c] = g.data[b * ch + c] * inv;
      }
    }
    return dx;
  }

 private:
  std::vector<std::size_t> in_shape_;
};

/// Inverted dropout: in training each element is zeroed with probability p
/// and survivors are scaled by 1 / (1 - p). Identity at inference.
class Dropout final : public Layer {
 public:
  Dropout(double p, std::uint64_t seed) : p_(p), rng_(seed) { set_rate(p); }

  std::string kind() const override { return "dropout"; }
  double rate() const { return p_; }
  void set_rate(double p) {
    if (!(p >= 0.0 && p < 1.0)) fail(ErrorCode::InvalidHyperparams, "dropout probability must lie in [0, 1)");
    p_ = p;
  }
  void reseed(std::uint64_t seed) { rng_ = Rng(seed); }

  Tensor forward(const Tensor& x, Mode mode) override {
    train_ = mode == Mode::Train && p_ > 0.0;
    if (!train_) return x;
    Tensor y = x;
    scale_.assign(x.size(), 0.0);
    const double keep = 1.0 / (1.0 - p_);
    for (std::size_t i = 0; i < y.size(); ++i) {
      scale_[i] = rng_.uniform() < p_ ? 0.0 : keep;
      y.data[i] *= scale_[i];
    }
    return y;
  }

  Tensor backward(const Tensor& g) override {
    if (!train_) return g;
    Tensor dx = g;
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= scale_[i];
    return dx;
  }

 private:
  double p_;
  Rng rng_;
  bool train_ = false;
  std::vector<double> scale_;
};

inline Tensor dropout(const Tensor& x, double p, Mode mode, std::uint64_t seed) {
  Dropout d(p, seed);
  return d.forward(x, mode);
}

/// Multi-head scaled dot-product self-attention over (B, T, D) with H heads
/// of width d_k = D / H. Per head: softmax(Q K^T / sqrt(d_k)) V, heads
/// concatenated and projected by W_O. Projections have no bias.
class MultiHeadAttention final : public Layer {
 public:
  MultiHeadAttention(std::size_t model_dim, std::size_t heads) : d_(model_dim), h_(heads) {
    if (heads == 0 || model_dim % heads != 0) {
      fail(ErrorCode::DimensionNotDivisible, "model dimension " + std::to_string(model_dim) +
                                                 " is not divisible by " + std::to_string(heads) + " heads");
    }
    dk_ = d_ / h_;
    for (auto* w : {&wq_, &wk_, &wv_, &wo_}) w->assign(d_ * d_, 0.0);
    for (auto* g : {&gq_, &gk_, &gv_, &go_}) g->assign(d_ * d_, 0.0);
  }

  std::string kind() const override { return "multi_head_attention"; }
  std::size_t heads() const { return h_; }
  std::size_t key_dim() const { return dk_; }
  std::vector<double>& wq() { return wq_; }
  std::vector<double>& wk() { return wk_; }
  std::vector<double>& wv() { return wv_; }
  std::vector<double>& wo() { return wo_; }

  void init(Rng& rng) {
    for (auto* w : {&wq_, &wk_, &wv_, &wo_}) he_init(*w, d_, rng);
  }

  /// Attention weights of the last forward pass, indexed [b][h][t][u].
  const std::vector<double>& attention() const { return attn_; }

  Tensor forward(const Tensor& x, Mode) override {
    require_rank(x, 3, "multi_head_attention");
    if (x.dim(2) != d_) fail(ErrorCode::ShapeMismatch, "attention expects model dimension " + std::to_string(d_));
    x_ = x;
    const std::size_t batch = x.dim(0), t_len = x.dim(1);
    t_ = t_len;
    q_ = project(x, wq_);
    k_ = project(x, wk_);
    v_ = project(x, wv_);
    o_ = Tensor(x.shape);
    attn_.assign(batch * h_ * t_len * t_len, 0.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk_));
    std::vector<double> row(t_len);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t h = 0; h < h_; ++h) {
        for (std::size_t t = 0; t < t_len; ++t) {
          const double* qt = &q_.data[(b * t_len + t) * d_ + h * dk_];
          double peak = -std::numeric_limits<double>::infinity();
          for (std::size_t u = 0; u < t_len; ++u) {
            row[u] = scale * dot(qt, &k_.data[(b * t_len + u) * d_ + h * dk_], dk_);
            peak = std::max(peak, row[u]);
          }
          double z = 0.0;
          for (std::size_t u = 0; u < t_len; ++u) {
            row[u] = std::exp(row[u] - peak);
            z += row[u];
          }
          double* a = &attn_[((b * h_ + h) * t_len + t) * t_len];
          double* ot = &o_.data[(b * t_len + t) * d_ + h * dk_];
          for (std::size_t u = 0; u < t_len; ++u) {
            a[u] = row[u] / z;
            axpy(a[u], &v_.data[(b * t_len + u) * d_ + h * dk_], ot, dk_);
          }
        }
      }
    }
    return project(o_, wo_);
  }

  Tensor backward(const Tensor& g) override {
    const std::size_t batch = x_.dim(0), t_len = t_;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk_));
    accumulate_weight_grad(o_, g, go_);
    Tensor d_o = project_transposed(g, wo_);
    Tensor dq(x_.shape), dk(x_.shape), dv(x_.shape);
    std::vector<double> da(t_len);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t h = 0; h < h_; ++h) {
        for (std::size_t t = 0; t < t_len; ++t) {
          const double* a = &attn_[((b * h_ + h) * t_len + t) * t_len];
          const double* dot_t = &d_o.data[(b * t_len + t) * d_ + h * dk_];
          double weighted = 0.0;
          for (std::size_t u = 0; u < t_len; ++u) {
            da[u] = dot(dot_t, &v_.data[(b * t_len + u) * d_ + h * dk_], dk_);
            weighted += a[u] * da[u];
            axpy(a[u], dot_t, &dv.data[(b * t_len + u) * d_ + h * dk_], dk_);
          }
          const double* qt = &q_.data[(b * t_len + t) * d_ + h * dk_];
          double* dqt = &dq.data[(b * t_len + t) * d_ + h * dk_];
          for (std::size_t u = 0; u < t_len; ++u) {
            const double ds = a[u] * (da[u] - weighted) * scale;
            if (ds == 0.0) continue;
            axpy(ds, &k_.data[(b * t_len + u) * d_ + h * dk_], dqt, dk_);
            axpy(ds, qt, &dk.data[(b * t_len + u) * d_ + h * dk_], dk_);
          }
        }
      }
    }
    accumulate_weight_grad(x_, dq, gq_);
    accumulate_weight_grad(x_, dk, gk_);
    accumulate_weight_grad(x_, dv, gv_);
    Tensor dx = project_transposed(dq, wq_);
    const Tensor from_k = project_transposed(dk, wk_);
    const Tensor from_v = project_transposed(dv, wv_);
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += from_k.data[i] + from_v.data[i];
    return dx;
  }

  std::vector<ParamRef> params() override {
    return {{"Wq", &wq_, &gq_}, {"Wk", &wk_, &gk_}, {"Wv", &wv_, &gv_}, {"Wo", &wo_, &go_}};
  }

 private:
  /// Row-wise x W with W stored D x D (input index major).
  Tensor project(const Tensor& x, const std::vector<double>& w) const {
    Tensor y(x.shape);
    const std::size_t rows = x.size() / d_;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xr = &x.data[r * d_];
      double* yr = &y.data[r * d_];
      for (std::size_t i = 0; i < d_; ++i) axpy(xr[i], &w[i * d_], yr, d_);
    }
    return y;
  }

  /// Row-wise g W^T.
  Tensor project_transposed(const Tensor& g, const std::vector<double>& w) const {
    Tensor y(g.shape);
    const std::size_t rows = g.size() / d_;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* gr = &g.data[r * d_];
      double* yr = &y.data[r * d_];
      for (std::size_t i = 0; i < d_; ++i) yr[i] = dot(&w[i * d_], gr, d_);
    }
    return y;
  }

  /// dW += x^T g over all rows.
  void accumulate_weight_grad(const Tensor& x, const Tensor& g, std::vector<double>& dw) const {
    const std::size_t rows = x.size() / d_;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xr = &x.data[r * d_];
      const double* gr = &g.data[r * d_];
      for (std::size_t i = 0; i < d_; ++i) {
        if (xr[i] != 0.0) axpy(xr[i], gr, &dw[i * d_], d_);
      }
    }
  }

  std::size_t d_, h_, dk_ = 0, t_ = 0;
  std::vector<double> wq_, wk_, wv_, wo_, gq_, gk_, gv_, go_;
  Tensor x_, q_, k_, v_, o_;
  std::vector<double> attn_;
};

}  // namespace vtac::nn

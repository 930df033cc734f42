#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "vtac/nn/adam.hpp"
#include "vtac/nn/layers.hpp"
#include "vtac/nn/loss.hpp"
#include "oracles.hpp"

using namespace vtac;
using namespace vtac::nn;
using oracle::gradient_check;
using oracle::randomize;
using oracle::random_tensor;
using oracle::relative_error;

namespace {

constexpr double kStep = 1e-6;  // finite-difference step for the loss check
constexpr double kTolerance = 1e-4;

}  // namespace

TEST(Gradient, Dense) {
  Rng rng(1);
  for (int shape = 0; shape < 5; ++shape) {
    const std::size_t b = 1 + rng.index(5), in = 1 + rng.index(7), out = 1 + rng.index(6);
    Dense layer(in, out);
    randomize(layer, rng);
    EXPECT_LE(gradient_check(layer, random_tensor({b, in}, rng), Mode::Train, rng), kTolerance)
        << b << "x" << in << "->" << out;
  }
}

TEST(Gradient, Conv1d) {
  Rng rng(2);
  for (int shape = 0; shape < 5; ++shape) {
    const std::size_t b = 1 + rng.index(3), t = 3 + rng.index(8), c = 1 + rng.index(3), k = 1 + rng.index(4);
    const std::size_t f = 1 + 2 * rng.index(3);
    Conv1d layer(c, k, f);
    randomize(layer, rng);
    EXPECT_LE(gradient_check(layer, random_tensor({b, t, c}, rng), Mode::Train, rng), kTolerance)
        << b << "x" << t << "x" << c << " k=" << k << " f=" << f;
  }
}

TEST(Gradient, BatchNormTrainMode) {
  Rng rng(3);
  for (int shape = 0; shape < 5; ++shape) {
    const std::size_t n = 1 + rng.index(5);
    std::vector<std::size_t> shape_in =
        shape % 2 == 0 ? std::vector<std::size_t>{2 + rng.index(6), n}
                       : std::vector<std::size_t>{1 + rng.index(3), 2 + rng.index(4), n};
    BatchNorm layer(n);
    randomize(layer, rng);
    EXPECT_LE(gradient_check(layer, random_tensor(shape_in, rng, 2.0), Mode::Train, rng), kTolerance);
  }
}

TEST(Gradient, BatchNormInferMode) {
  Rng rng(4);
  BatchNorm layer(3);
  randomize(layer, rng);
  layer.running_mean() = {0.3, -1.0, 2.0};
  layer.running_var() = {0.5, 2.0, 1.5};
  EXPECT_LE(gradient_check(layer, random_tensor({4, 3}, rng), Mode::Infer, rng), kTolerance);
}

TEST(Gradient, MaxPool) {
  Rng rng(5);
  for (int shape = 0; shape < 5; ++shape) {
    MaxPool1d layer;
    const std::size_t b = 1 + rng.index(3), t = 2 + rng.index(9), c = 1 + rng.index(4);
    EXPECT_LE(gradient_check(layer, random_tensor({b, t, c}, rng), Mode::Train, rng), kTolerance);
  }
}

TEST(Gradient, MultiHeadAttention) {
  Rng rng(6);
  const std::size_t configs[][2] = {{4, 1}, {4, 2}, {6, 3}, {8, 4}, {8, 2}, {6, 1}};
  for (const auto& cfg : configs) {
    MultiHeadAttention layer(cfg[0], cfg[1]);
    randomize(layer, rng);
    const std::size_t b = 1 + rng.index(2), t = 2 + rng.index(5);
    EXPECT_LE(gradient_check(layer, random_tensor({b, t, cfg[0]}, rng), Mode::Train, rng), kTolerance)
        << "D=" << cfg[0] << " H=" << cfg[1];
  }
}

TEST(Gradient, GlobalAvgPool) {
  Rng rng(7);
  for (int shape = 0; shape < 5; ++shape) {
    GlobalAvgPool layer;
    const std::size_t b = 1 + rng.index(3), t = 1 + rng.index(7), c = 1 + rng.index(4);
    EXPECT_LE(gradient_check(layer, random_tensor({b, t, c}, rng), Mode::Train, rng), kTolerance);
  }
}

TEST(Gradient, ReluAndDropout) {
  Rng rng(8);
  for (int shape = 0; shape < 5; ++shape) {
    Relu relu;
    const std::vector<std::size_t> s = {1 + rng.index(4), 1 + rng.index(6)};
    EXPECT_LE(gradient_check(relu, random_tensor(s, rng), Mode::Train, rng), kTolerance);
    Dropout drop(0.4, 1);
    EXPECT_LE(gradient_check(drop, random_tensor(s, rng), Mode::Train, rng, [&] { drop.reseed(99); }), kTolerance);
  }
}

TEST(Gradient, SigmoidWeightedBce) {
  Rng rng(9);
  for (int shape = 0; shape < 5; ++shape) {
    const std::size_t n = 1 + rng.index(10);
    std::vector<double> z(n), w(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = rng.normal(0.0, 3.0);
      y[i] = rng.bernoulli(0.4);
      w[i] = rng.uniform(0.2, 3.0);
    }
    const auto res = weighted_bce(z, y, w);
    for (std::size_t i = 0; i < n; ++i) {
      auto zp = z, zm = z;
      zp[i] += kStep;
      zm[i] -= kStep;
      const double num = (weighted_bce(zp, y, w).loss - weighted_bce(zm, y, w).loss) / (2 * kStep);
      EXPECT_LE(relative_error(res.grad[i], num), kTolerance);
    }
  }
}

TEST(Loss, KnownValueAndErrors) {
  const std::vector<double> z = {0.0, 2.0};
  const std::vector<int> y = {1, 0};
  const std::vector<double> w = {3.0, 1.0};
  const double p1 = 1.0 / (1.0 + std::exp(-2.0));
  EXPECT_NEAR(weighted_bce(z, y, w).loss, (3.0 * std::log(2.0) - std::log(1.0 - p1)) / 4.0, 1e-12);
  EXPECT_NEAR(weighted_bce(z, y).loss, (std::log(2.0) - std::log(1.0 - p1)) / 2.0, 1e-12);
  EXPECT_NEAR(weighted_bce(std::vector<double>{0.0, 0.0}, std::vector<int>{0, 1}).loss, std::log(2.0), 1e-15);
  EXPECT_LE(weighted_bce(std::vector<double>{40.0, -40.0}, std::vector<int>{1, 0}).loss, 1e-6);
  EXPECT_THROW(weighted_bce(z, std::vector<int>{1, 2}), Error);
  EXPECT_THROW(weighted_bce(z, std::vector<int>{1}), Error);
  // Saturated logits stay finite.
  EXPECT_TRUE(std::isfinite(weighted_bce(std::vector<double>{-800.0}, std::vector<int>{1}).loss));
  EXPECT_EQ(sigmoid(-800.0), 0.0);
  EXPECT_EQ(sigmoid(800.0), 1.0);
}

TEST(BatchNorm, RunningStatisticsAndInference) {
  BatchNorm bn(1);
  Tensor x({4, 1}, std::vector<double>{1, 2, 3, 6});
  bn.forward(x, Mode::Train);
  // batch mean 3, biased variance 3.5
  EXPECT_DOUBLE_EQ(bn.running_mean()[0], 0.1 * 3.0);
  EXPECT_DOUBLE_EQ(bn.running_var()[0], 0.9 * 1.0 + 0.1 * 3.5);
  const auto y = bn.forward(Tensor({1, 1}, std::vector<double>{2.0}), Mode::Infer);
  EXPECT_NEAR(y.data[0], (2.0 - 0.3) / std::sqrt(0.9 + 0.35 + 1e-5), 1e-12);
  try {
    bn.forward(Tensor({1, 1}, std::vector<double>{2.0}), Mode::Train);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BatchTooSmall);
  }
}

TEST(Dropout, Statistics) {
  const double p = 0.3;
  Tensor x({200, 500}, 1.0);
  const auto y = dropout(x, p, Mode::Train, 42);
  std::size_t zeros = 0;
  double sum = 0.0;
  for (double v : y.data) {
    if (v == 0.0) {
      ++zeros;
    } else {
      EXPECT_DOUBLE_EQ(v, 1.0 / (1.0 - p));
    }
    sum += v;
  }
  const double n = static_cast<double>(y.size());
  // Binomial(1e5, 0.3): sd of the zero fraction ~ 0.00145.
  EXPECT_NEAR(zeros / n, p, 0.01);
  EXPECT_NEAR(sum / n, 1.0, 0.02);
  EXPECT_EQ(dropout(x, p, Mode::Infer, 42).data, x.data);
  EXPECT_EQ(dropout(x, p, Mode::Train, 42).data, y.data);
  EXPECT_NE(dropout(x, p, Mode::Train, 43).data, y.data);
  EXPECT_THROW(dropout(x, 1.0, Mode::Train, 1), Error);
}

TEST(Attention, RowsAreDistributions) {
  Rng rng(10);
  MultiHeadAttention mha(8, 2);
  mha.init(rng);
  mha.forward(random_tensor({2, 5, 8}, rng), Mode::Infer);
  const auto& a = mha.attention();
  ASSERT_EQ(a.size(), 2u * 2 * 5 * 5);
  for (std::size_t row = 0; row < a.size() / 5; ++row) {
    double s = 0.0;
    for (std::size_t u = 0; u < 5; ++u) {
      EXPECT_GE(a[row * 5 + u], 0.0);
      s += a[row * 5 + u];
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  try {
    MultiHeadAttention bad(6, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionNotDivisible);
  }
}

TEST(Attention, SingleHeadMatchesHandComputation) {
  MultiHeadAttention mha(2, 1);
  // Identity projections: Q = K = V = x, output = softmax(x x^T / sqrt 2) x.
  for (auto* w : {&mha.wq(), &mha.wk(), &mha.wv(), &mha.wo()}) *w = {1, 0, 0, 1};
  const Tensor x({1, 2, 2}, std::vector<double>{1, 0, 0, 2});
  const auto y = mha.forward(x, Mode::Infer);
  const double s = 1.0 / std::sqrt(2.0);
  const double a00 = std::exp(s) / (std::exp(s) + 1.0);
  const double a11 = std::exp(4 * s) / (1.0 + std::exp(4 * s));
  EXPECT_NEAR(y.data[0], a00 * 1.0, 1e-12);
  EXPECT_NEAR(y.data[1], (1 - a00) * 2.0, 1e-12);
  EXPECT_NEAR(y.data[2], (1 - a11) * 1.0, 1e-12);
  EXPECT_NEAR(y.data[3], a11 * 2.0, 1e-12);
}

TEST(Conv1d, SamePaddingAndShapes) {
  Conv1d conv(1, 1, 3);
  conv.weights() = {1, 2, 3};
  conv.bias() = {0.5};
  const auto y = conv.forward(Tensor({1, 4, 1}, std::vector<double>{1, 2, 3, 4}), Mode::Infer);
  ASSERT_EQ(y.shape, (std::vector<std::size_t>{1, 4, 1}));
  EXPECT_EQ(y.data[0], 0.5 + 2 * 1 + 3 * 2);
  EXPECT_EQ(y.data[1], 0.5 + 1 * 1 + 2 * 2 + 3 * 3);
  EXPECT_EQ(y.data[3], 0.5 + 1 * 3 + 2 * 4);
  EXPECT_THROW(Conv1d(1, 1, 4), Error);
  EXPECT_THROW(conv.forward(Tensor({1, 4, 2}), Mode::Infer), Error);
}

TEST(MaxPool, DropsOddTrailingStep) {
  MaxPool1d pool;
  const auto y = pool.forward(Tensor({1, 5, 1}, std::vector<double>{1, 3, 2, 2, 9}), Mode::Infer);
  EXPECT_EQ(y.data, (std::vector<double>{3, 2}));
}

TEST(Adam, ConvergesOnQuadratic) {
  std::vector<double> w = {0.0};
  AdamMoments state;
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  for (std::uint64_t step = 1; step <= 200; ++step) {
    const std::vector<double> g = {2.0 * (w[0] - 3.0)};
    adam_step(w, g, state, step, cfg);
  }
  EXPECT_LT(std::abs(w[0] - 3.0), 0.05);
}

TEST(Adam, FirstStepHasLearningRateMagnitude) {
  std::vector<double> w = {1.0, -2.0};
  AdamMoments state;
  const std::vector<double> g = {0.37, -12.0};
  adam_step(w, g, state, 1, {});
  EXPECT_NEAR(w[0], 1.0 - 1e-3, 1e-9);
  EXPECT_NEAR(w[1], -2.0 + 1e-3, 1e-9);
  EXPECT_THROW(adam_step(w, g, state, 0, {}), Error);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  std::vector<double> w = {0.25, -4.0, 9.0};
  const auto before = w;
  AdamMoments state;
  const std::vector<double> g(3, 0.0);
  for (std::uint64_t step = 1; step <= 5; ++step) adam_step(w, g, state, step, {});
  EXPECT_EQ(w, before);
  EXPECT_THROW(adam_step(w, std::vector<double>(2, 0.0), state, 6, {}), Error);
}

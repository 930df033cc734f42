#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "vtac/imbalance.hpp"
#include "vtac/synth.hpp"
#include "oracles.hpp"

using namespace vtac;
using namespace vtac::imbalance;
using oracle::knn_brute;

namespace {

struct Data {
  Matrix x;
  std::vector<int> y;
};

Data labelled(std::size_t n_min, std::size_t n_maj, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Data data;
  data.x = Matrix(n_min + n_maj, d);
  for (auto& v : data.x.data) v = rng.normal();
  data.y.assign(n_min + n_maj, 0);
  for (std::size_t i = 0; i < n_min; ++i) data.y[i * (n_min + n_maj) / n_min] = 1;
  return data;
}

std::size_t count_label(const std::vector<int>& y, int label) {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), label));
}

}  // namespace

TEST(KNearest, MatchesBruteForce) {
  auto d = labelled(30, 70, 4, 1);
  std::vector<std::size_t> all(100);
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (std::size_t q = 0; q < 100; q += 7) {
    EXPECT_EQ(k_nearest(d.x, q, 5), knn_brute(d.x, q, 5, all));
  }
  // Duplicate points: ties resolve to the lower index.
  Matrix dup(4, 1);
  dup.data = {0, 1, 1, 1};
  EXPECT_EQ(k_nearest(dup, 0, 2), (std::vector<std::size_t>{1, 2}));
  EXPECT_THROW(k_nearest(dup, 0, 4), Error);
}

TEST(Smote, PaperClassCountsBalanceExactly) {
  auto d = labelled(1441, 3596, 6, 2);
  const auto r = smote(d.x, d.y, {Method::Smote, 1.0, 5, 9});
  EXPECT_EQ(r.features.rows, 1441u + 3596u + 2155u);
  EXPECT_EQ(count_label(r.labels, 1), 3596u);
  EXPECT_EQ(count_label(r.labels, 0), 3596u);
}

TEST(Smote, EverySyntheticRowOnItsParentSegment) {
  auto d = labelled(40, 160, 5, 3);
  std::vector<std::size_t> minority;
  for (std::size_t i = 0; i < d.y.size(); ++i) {
    if (d.y[i] == 1) minority.push_back(i);
  }
  const auto r = smote(d.x, d.y, {Method::Smote, 0.8, 5, 4});
  ASSERT_EQ(r.provenance.size(), 128u - 40u);
  for (std::size_t s = 0; s < r.provenance.size(); ++s) {
    const auto& o = r.provenance[s];
    EXPECT_EQ(d.y[o.seed_row], 1);
    const auto nn = knn_brute(d.x, o.seed_row, 5, minority);
    EXPECT_NE(std::find(nn.begin(), nn.end(), o.neighbor_row), nn.end());
    EXPECT_GE(o.gap, 0.0);
    EXPECT_LT(o.gap, 1.0);
    const auto z = r.features.row(r.n_original + s);
    for (std::size_t j = 0; j < d.x.cols; ++j) {
      const double a = d.x(o.seed_row, j), b = d.x(o.neighbor_row, j);
      EXPECT_EQ(z[j], a + o.gap * (b - a));
      EXPECT_GE(z[j], std::min(a, b));
      EXPECT_LE(z[j], std::max(a, b));
    }
    EXPECT_EQ(r.labels[r.n_original + s], 1);
  }
  // Originals untouched.
  for (std::size_t i = 0; i < d.x.data.size(); ++i) EXPECT_EQ(r.features.data[i], d.x.data[i]);
}

TEST(Smote, RatioAlreadyMetIsNoOp) {
  auto d = labelled(30, 70, 3, 5);
  const auto r = smote(d.x, d.y, {Method::Smote, 0.4, 5, 1});
  EXPECT_EQ(r.features, d.x);
  EXPECT_EQ(r.labels, d.y);
}

TEST(Smote, DeterministicAndErrors) {
  auto d = labelled(20, 80, 3, 6);
  const ResampleConfig cfg{Method::Smote, 1.0, 5, 7};
  EXPECT_EQ(smote(d.x, d.y, cfg).features, smote(d.x, d.y, cfg).features);
  auto one = labelled(1, 30, 3, 6);
  try {
    smote(one.x, one.y, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MinorityTooSmall);
  }
  EXPECT_THROW(smote(d.x, d.y, {Method::Smote, 1.5, 5, 7}), Error);
}

TEST(Smote, MinorityIsTheSmallerClass) {
  auto d = labelled(70, 30, 2, 8);  // label 1 is now the majority
  const auto r = smote(d.x, d.y, {Method::Smote, 1.0, 3, 1});
  EXPECT_EQ(count_label(r.labels, 0), 70u);
  for (std::size_t s = r.n_original; s < r.labels.size(); ++s) EXPECT_EQ(r.labels[s], 0);
}

TEST(Adasyn, AllocationSumsExactly) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto ds = synth::generate_feature_dataset(300, 4, 1.0, 0.2, seed);
    const auto r = adasyn(ds.features, ds.labels, {Method::Adasyn, 0.9, 5, seed});
    const auto n_maj = count_label(ds.labels, 0);
    const auto n_min = count_label(ds.labels, 1);
    EXPECT_EQ(r.provenance.size(), synthetic_count(n_min, n_maj, 0.9));
    EXPECT_EQ(count_label(r.labels, 1), static_cast<std::size_t>(std::llround(0.9 * n_maj)));
  }
}

TEST(Adasyn, ConcentratesOnTheBoundaryPoint) {
  // Minority cluster far from the majority except for one point placed inside it.
  Matrix x(26, 1);
  std::vector<int> y(26, 0);
  for (std::size_t i = 0; i < 20; ++i) x(i, 0) = static_cast<double>(i) * 0.01;  // majority near 0
  for (std::size_t i = 20; i < 25; ++i) {
    x(i, 0) = 100.0 + static_cast<double>(i);
    y[i] = 1;
  }
  x(25, 0) = 0.055;
  y[25] = 1;
  const auto r = adasyn(x, y, {Method::Adasyn, 1.0, 3, 2});
  ASSERT_EQ(r.provenance.size(), 14u);
  for (const auto& o : r.provenance) EXPECT_EQ(o.seed_row, 25u);
}

TEST(Adasyn, UniformFallbackWhenNoMajorityNeighbours) {
  Matrix x(12, 1);
  std::vector<int> y(12, 0);
  for (std::size_t i = 0; i < 8; ++i) x(i, 0) = static_cast<double>(i);
  for (std::size_t i = 8; i < 12; ++i) {
    x(i, 0) = 1000.0 + static_cast<double>(i);
    y[i] = 1;
  }
  const auto r = adasyn(x, y, {Method::Adasyn, 1.0, 2, 3});
  std::vector<std::size_t> per(12, 0);
  for (const auto& o : r.provenance) ++per[o.seed_row];
  for (std::size_t i = 8; i < 12; ++i) EXPECT_EQ(per[i], 1u);
}

TEST(Allocate, LargestRemainder) {
  const std::vector<double> w = {1, 1, 1};
  EXPECT_EQ(allocate(w, 10), (std::vector<std::size_t>{4, 3, 3}));
  const std::vector<double> w2 = {0.2, 0.0, 0.6};
  const auto a = allocate(w2, 7);
  EXPECT_EQ(a[0] + a[1] + a[2], 7u);
  EXPECT_EQ(a[1], 0u);
}

TEST(ClassWeights, SumToSampleCount) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 10 + rng.index(5000);
    std::vector<int> y(n, 0);
    y[0] = 1;
    y[1] = 0;
    for (std::size_t i = 2; i < n; ++i) y[i] = rng.bernoulli(0.3);
    const auto w = class_weights(y);
    double total = 0.0;
    for (int v : y) total += w(v);
    EXPECT_NEAR(total, static_cast<double>(n), 1e-9);
  }
  const std::vector<int> paper(5037, 0);
  std::vector<int> p = paper;
  std::fill(p.begin(), p.begin() + 1441, 1);
  const auto w = class_weights(p);
  EXPECT_DOUBLE_EQ(w.weight_true, 5037.0 / (2 * 1441));
  EXPECT_DOUBLE_EQ(w.weight_false, 5037.0 / (2 * 3596));
  try {
    class_weights(paper);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingleClass);
  }
}

TEST(Resample, NoneAndParse) {
  auto d = labelled(10, 40, 2, 1);
  const auto r = resample(d.x, d.y, {Method::None, 1.0, 5, 0});
  EXPECT_EQ(r.features, d.x);
  EXPECT_EQ(parse_method("adasyn"), Method::Adasyn);
  EXPECT_THROW(parse_method("oversample"), Error);
}

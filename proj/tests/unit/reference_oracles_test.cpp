// Copyright 2026 The scout-layer Authors
// SPDX-License-Identifier: Apache-2.0

// Sanity checks of the oracles themselves against hand arithmetic, so that
// agreement with the fast paths means something.

#include <gtest/gtest.h>

#include <cmath>

#include "scout/reference_oracles.hpp"
#include "test_util.hpp"

namespace scout {
namespace {

using testing::randn;
using D = Tensor<double>;

D eye(std::size_t d) {
  D m({d, d});
  for (std::size_t i = 0; i < d; ++i) m(i, i) = 1.0;
  return m;
}

TEST(DenseScoutOracle, FewerTokensThanIntervalGivesValues) {
  const D x = randn(1, {5, 3});
  const D wq = randn(2, {3, 3}), wk = randn(3, {3, 3}), wv = randn(4, {3, 3});
  EXPECT_LT(max_abs_diff(oracle::dense_scout_oracle(x, wq, wk, wv, 6), oracle::naive_matmul(x, wv)), 1e-15);
}

TEST(DenseScoutOracle, UnitIntervalByHand) {
  // Identity projections, rows e1, e2, e1 + e2. With k = 1 token t sees rows
  // 1..t as checkpoints plus itself once more.
  const D x = D::matrix({{1, 0}, {0, 1}, {1, 1}});
  const D out = oracle::dense_scout_oracle(x, eye(2), eye(2), eye(2), 1);
  const double s = 1.0 / std::sqrt(2.0);
  // t = 1: two identical keys, output e1.
  EXPECT_NEAR(out(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(out(0, 1), 0.0, 1e-15);
  // t = 2: logits {0, s, s} over values {e1, e2, e2}.
  const double e = std::exp(s);
  EXPECT_NEAR(out(1, 0), 1.0 / (1.0 + 2.0 * e), 1e-15);
  EXPECT_NEAR(out(1, 1), 2.0 * e / (1.0 + 2.0 * e), 1e-15);
  // t = 3: logits {s, s, 2s, 2s} over values {e1, e2, e1+e2, e1+e2}.
  const double a = std::exp(s), b = std::exp(2.0 * s);
  const double expected = (a + 2.0 * b) / (2.0 * a + 2.0 * b);
  EXPECT_NEAR(out(2, 0), expected, 1e-15);
  EXPECT_NEAR(out(2, 1), expected, 1e-15);
}

TEST(NaiveSwa, ZeroWindowPassesValuesThrough) {
  const D x = randn(5, {6, 3});
  const D w = randn(6, {3, 3});
  EXPECT_LT(max_abs_diff(oracle::naive_swa(x, w, w, eye(3), 0), x), 1e-15);
}

TEST(NaiveSsm, ZeroInputGivesZero) {
  const D out = oracle::naive_ssm(D({4, 2}, 0.0), randn(7, {2, 3}), randn(8, {2, 3}), randn(9, {2, 3}));
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(FullCausalAttention, SingleTokenGivesItsValue) {
  const D x = randn(10, {1, 4});
  const D wv = randn(11, {4, 4});
  EXPECT_LT(max_abs_diff(oracle::full_causal_attention(x, randn(12, {4, 4}), randn(13, {4, 4}), wv),
                         oracle::naive_matmul(x, wv)),
            1e-15);
}

TEST(FullCausalAttention, WeightsAreCausalAndRowStochastic) {
  const D x = randn(14, {9, 4});
  const D w = oracle::full_causal_weights(x, randn(15, {4, 4}), randn(16, {4, 4}));
  for (std::size_t t = 0; t < 9; ++t) {
    double z = 0;
    for (std::size_t j = 0; j < 9; ++j) {
      if (j > t) {
        EXPECT_EQ(w(t, j), 0.0);
      }
      EXPECT_GE(w(t, j), 0.0);
      z += w(t, j);
    }
    EXPECT_NEAR(z, 1.0, 1e-12);
  }
}

TEST(OracleCrossEntropy, UniformLogitsGiveLogVocab) {
  const D logits({3, 10}, 0.25);
  EXPECT_NEAR(oracle::cross_entropy(logits, {1, 5, 9}), std::log(10.0), 1e-15);
}

}  // namespace
}  // namespace scout

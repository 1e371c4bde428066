// Copyright 2026 The scout-layer Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "scout/checkpoint_attention.hpp"
#include "scout/grad_check.hpp"
#include "scout/reference_oracles.hpp"
#include "test_util.hpp"

namespace scout {
namespace {

using testing::perturbed;
using testing::randn;
using testing::rows_identical;
using D = Tensor<double>;
using Idx = std::vector<std::size_t>;

AttnParams<double> attn(std::uint64_t seed, std::size_t d, std::size_t k) {
  return AttnParams<double>::init(Rng(seed), "attn", d, k);
}

D oracle_for(const D& xt, const AttnParams<double>& p) {
  return oracle::dense_scout_oracle(xt, p.wq, p.wk, p.wv, p.interval);
}

// ---- indices and compression ----

TEST(CheckpointIndices, Examples) {
  EXPECT_EQ(checkpoint_indices(25, 10), (Idx{10, 20}));
  EXPECT_EQ(checkpoint_indices(5, 10), Idx{});
  EXPECT_EQ(checkpoint_indices(20, 10), (Idx{10, 20}));
  EXPECT_EQ(checkpoint_indices(0, 3), Idx{});
  EXPECT_EQ(checkpoint_indices(4, 1), (Idx{1, 2, 3, 4}));
}

TEST(CheckpointIndices, LengthIsFloorOfRatio) {
  for (std::size_t n = 0; n < 70; ++n)
    for (std::size_t k = 1; k < 12; ++k) {
      const Idx idx = checkpoint_indices(n, k);
      ASSERT_EQ(idx.size(), n / k);
      for (std::size_t j = 0; j < idx.size(); ++j) EXPECT_EQ(idx[j], (j + 1) * k);
    }
}

TEST(CheckpointIndices, ZeroIntervalIsConfigError) { EXPECT_THROW(checkpoint_indices(10, 0), ConfigError); }

TEST(Compress, EmptyIndexListGivesNoRows) {
  const D c = compress(randn(1, {5, 3}), {});
  EXPECT_EQ(c.shape(), (Shape{0, 3}));
}

TEST(Compress, LastPositionSelectsLastRow) {
  const D x = randn(2, {6, 3});
  const D c = compress(x, {6});
  ASSERT_EQ(c.shape(), (Shape{1, 3}));
  EXPECT_TRUE(std::equal(c.data().begin(), c.data().end(), x.row(5).begin()));
}

TEST(Compress, EveryOtherRow) {
  const D x = randn(3, {8, 4});
  const D c = compress(x, checkpoint_indices(8, 2));
  ASSERT_EQ(c.shape(), (Shape{4, 4}));
  for (std::size_t j = 0; j < 4; ++j)
    for (std::size_t col = 0; col < 4; ++col) EXPECT_EQ(c(j, col), x(2 * j + 1, col));
}

TEST(Compress, OutOfRangeIsInternalError) {
  const D x = randn(4, {3, 2});
  EXPECT_THROW(compress(x, {0}), InternalError);
  EXPECT_THROW(compress(x, {4}), InternalError);
}

// ---- mask ----

TEST(CheckpointMask, FirstRowEmptyWhenIntervalAboveOne) {
  for (std::size_t k = 2; k < 6; ++k) {
    const auto mask = causal_checkpoint_mask(20, checkpoint_indices(20, k));
    for (std::size_t j = 0; j < mask.m; ++j) EXPECT_FALSE(mask(0, j));
  }
}

TEST(CheckpointMask, EnumeratedSmallCase) {
  const auto mask = causal_checkpoint_mask(4, checkpoint_indices(4, 2));
  ASSERT_EQ(mask.m, 2u);
  const bool expected[4][2] = {{false, false}, {true, false}, {true, false}, {true, true}};
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(mask(t, j), expected[t][j]) << t << "," << j;
  EXPECT_EQ(mask.allowed_count(), 4u);
  EXPECT_EQ(mask.allowed_count() + mask.n, 8u);
}

TEST(CheckpointMask, AdditiveFormUsesLowestFinite) {
  const auto mask = causal_checkpoint_mask(4, checkpoint_indices(4, 2));
  const D add = additive_mask<double>(mask);
  EXPECT_EQ(add(0, 0), std::numeric_limits<double>::lowest());
  EXPECT_EQ(add(1, 0), 0.0);
  EXPECT_TRUE(add.all_finite());
}

// ---- batch attention ----

TEST(ScoutAttention, NoCheckpointsGivesValues) {
  const D x = randn(5, {7, 4});
  for (std::size_t k : {8u, 100u}) {
    const auto p = attn(6, 4, k);
    EXPECT_EQ(scout_attention(x, p), matmul(x, p.wv));
  }
}

TEST(ScoutAttention, FirstCheckpointSplitsEvenly) {
  const std::size_t k = 5;
  const D x = randn(7, {12, 4});
  const auto p = attn(8, 4, k);
  const auto s = scout_scores(x, p);
  const D v = matmul(x, p.wv);
  const D out = scout_attention(x, p);
  ASSERT_EQ(s.weights.shape(), (Shape{12, 3}));
  EXPECT_EQ(s.weights(k - 1, 0), 0.5);
  EXPECT_EQ(s.weights(k - 1, 1), 0.0);
  EXPECT_EQ(s.weights(k - 1, 2), 0.5);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(out(k - 1, c), v(k - 1, c), 1e-15);
}

TEST(ScoutAttention, MatchesDenseOracle) {
  const D x = randn(9, {32, 8});
  const auto p = attn(10, 8, 4);
  EXPECT_LT(max_abs_diff(scout_attention(x, p), oracle_for(x, p)), 1e-10);
}

TEST(ScoutAttention, OracleGrid) {
  const Idx lengths = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 15, 16, 17, 31, 32, 33, 63, 64, 65, 100, 127, 128};
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    for (std::size_t k : {1u, 2u, 3u, 5u, 8u, 16u})
      for (std::size_t d : {4u, 8u})
        for (std::size_t n : lengths) {
          const D x = randn(1000 * seed + n, {n, d}, 1.5);
          const auto p = attn(7000 + seed, d, k);
          worst = std::max(worst, max_abs_diff(scout_attention(x, p), oracle_for(x, p)));
        }
  EXPECT_LT(worst, 1e-10);
}

TEST(ScoutAttention, ScoresAreMaskedAndRowStochastic) {
  const D x = randn(11, {40, 4}, 2.0);
  for (std::size_t k : {1u, 3u, 7u}) {
    const auto p = attn(12, 4, k);
    const auto s = scout_scores(x, p);
    const Idx idx = checkpoint_indices(40, k);
    ASSERT_EQ(s.weights.dim(1), idx.size() + 1);
    for (std::size_t t = 0; t < 40; ++t) {
      double z = 0;
      for (std::size_t j = 0; j <= idx.size(); ++j) z += s.weights(t, j);
      EXPECT_NEAR(z, 1.0, 1e-12);
      for (std::size_t j = 0; j < idx.size(); ++j) {
        if (idx[j] > t + 1) {
          EXPECT_EQ(s.a_comp(t, j), std::numeric_limits<double>::lowest());
          EXPECT_EQ(s.weights(t, j), 0.0);
        }
      }
    }
  }
}

TEST(ScoutAttention, DiagonalScoreIsOwnQueryKeyProduct) {
  const D x = randn(13, {9, 4});
  const auto p = attn(14, 4, 3);
  const auto s = scout_scores(x, p);
  for (std::size_t t = 0; t < 9; ++t) {
    const auto q = oracle::project(x, t, p.wq);
    const auto k = oracle::project(x, t, p.wk);
    EXPECT_NEAR(s.d_self[t], oracle::inner(q, k), 1e-12);
  }
}

TEST(ScoutAttention, CausalUnderPerturbation) {
  const D x = randn(15, {30, 4});
  const auto p = attn(16, 4, 4);
  const D base = scout_attention(x, p);
  for (std::size_t t = 0; t < 30; ++t) {
    const D out = scout_attention(perturbed(x, t, 0, 0.3), p);
    EXPECT_TRUE(rows_identical(base, out, 0, t)) << "t=" << t;
  }
}

TEST(ScoutAttention, SparsitySignature) {
  // Perturbing a non-checkpoint token changes only its own row; perturbing a
  // checkpoint token also reaches every later row.
  const std::size_t n = 30, k = 4;
  const D x = randn(17, {n, 4});
  const auto p = attn(18, 4, k);
  const D base = scout_attention(x, p);
  for (std::size_t t = 0; t < n; ++t) {
    const D out = scout_attention(perturbed(x, t, 1, 0.3), p);
    const bool checkpoint = (t + 1) % k == 0;
    EXPECT_TRUE(rows_identical(base, out, 0, t));
    EXPECT_FALSE(rows_identical(base, out, t, t + 1));
    if (checkpoint) {
      for (std::size_t u = t + 1; u < n; ++u) EXPECT_FALSE(rows_identical(base, out, u, u + 1)) << t << "->" << u;
    } else {
      EXPECT_TRUE(rows_identical(base, out, t + 1, n)) << "t=" << t;
    }
  }
}

TEST(ScoutAttention, UnitIntervalApproachesDenseWork) {
  // k = 1 makes every earlier token a checkpoint; the key set is dense causal
  // attention's plus a repeated self key.
  const auto mask = causal_checkpoint_mask(50, checkpoint_indices(50, 1));
  EXPECT_EQ(mask.allowed_count() + 50, 50u * 51u / 2u + 50u);
}

// ---- incremental cache ----

TEST(CheckpointCache, StepsReproduceBatch) {
  const std::size_t n = 64, k = 8, d = 8;
  const D x = randn(19, {n, d});
  const auto p = attn(20, d, k);
  const D batch = scout_attention(x, p);
  CheckpointCache<double> cache(d, k);
  OpCounter ops;
  double worst = 0;
  std::uint64_t expected_dots = 0;
  for (std::size_t t = 1; t <= n; ++t) {
    const D y = scout_attention_step(cache, x.row(t - 1), p, t, &ops);
    for (std::size_t c = 0; c < d; ++c) worst = std::max(worst, std::abs(y[c] - batch(t - 1, c)));
    EXPECT_EQ(cache.entries(), t / k);
    EXPECT_EQ(cache.stored_numbers(), (t / k) * 2 * d);
    expected_dots += t / k + 1;
  }
  EXPECT_LT(worst, 1e-10);
  EXPECT_EQ(cache.positions(), checkpoint_indices(n, k));
  EXPECT_EQ(ops.score_dots, expected_dots);
}

TEST(CheckpointCache, StepsReproduceBatchAcrossIntervals) {
  const D x = randn(21, {100, 4}, 1.5);
  for (std::size_t k : {1u, 2u, 3u, 5u, 16u, 200u}) {
    const auto p = attn(22, 4, k);
    const D batch = scout_attention(x, p);
    CheckpointCache<double> cache(4, k);
    double worst = 0;
    for (std::size_t t = 1; t <= 100; ++t) {
      const D y = cache.step(x.row(t - 1), p, t);
      for (std::size_t c = 0; c < 4; ++c) worst = std::max(worst, std::abs(y[c] - batch(t - 1, c)));
    }
    EXPECT_LT(worst, 1e-10) << "k=" << k;
    EXPECT_EQ(cache.entries(), 100 / k);
  }
}

TEST(CheckpointCache, FirstTokenSeesOnlyItself) {
  const D x = randn(23, {1, 4});
  const auto p = attn(24, 4, 3);
  CheckpointCache<double> cache(4, 3);
  const D y = cache.step(x.row(0), p, 1);
  EXPECT_EQ(cache.entries(), 0u);
  const D v = vecmat(x.row(0), p.wv);
  EXPECT_EQ(y, v);
}

TEST(CheckpointCache, PositionDesyncIsUsageError) {
  const D x = randn(25, {3, 4});
  const auto p = attn(26, 4, 2);
  CheckpointCache<double> cache(4, 2);
  cache.step(x.row(0), p, 1);
  EXPECT_THROW(cache.step(x.row(1), p, 3), UsageError);
  EXPECT_THROW(cache.step(x.row(1), p, 1), UsageError);
  const auto other = attn(26, 4, 3);
  EXPECT_THROW(cache.step(x.row(1), other, 2), UsageError);
}

// ---- gradients ----

TEST(ScoutAttentionGradCheck, ProjectionsAndInput) {
  for (std::size_t k : {1u, 3u, 4u, 20u}) {
    D x = randn(27, {13, 4});
    auto p = attn(28, 4, k);
    auto f = [&](Graph<double>& g) { return testing::weighted_sum(g, scout_attention(g, g.leaf(x), p), 29); };
    std::vector<D*> params{&p.wq, &p.wk, &p.wv, &x};
    if (k > 13) params = {&p.wv, &x};  // no checkpoints: q and k do not reach the output
    const auto rep = grad_check(f, params);
    EXPECT_LT(rep.max_rel_error, 1e-4) << "k=" << k << " tensor " << rep.worst_tensor;
  }
}

TEST(ScoutAttentionGradCheck, MeanOutput) {
  D x = randn(30, {12, 4});
  auto p = attn(31, 4, 3);
  auto f = [&](Graph<double>& g) { return ag::mean(g, scout_attention(g, g.leaf(x), p)); };
  EXPECT_LT(grad_check(f, {&p.wq, &p.wk, &p.wv, &x}).max_rel_error, 1e-4);
}

}  // namespace
}  // namespace scout

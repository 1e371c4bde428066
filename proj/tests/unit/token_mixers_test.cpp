// Copyright 2026 The scout-layer Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "scout/grad_check.hpp"
#include "scout/reference_oracles.hpp"
#include "scout/token_mixers.hpp"
#include "test_util.hpp"

namespace scout {
namespace {

using testing::perturbed;
using testing::randn;
using testing::rows_identical;
using D = Tensor<double>;

SwaParams<double> swa(std::uint64_t seed, std::size_t d, std::size_t w) {
  return SwaParams<double>::init(Rng(seed), "swa", d, w);
}

SsmParams<double> ssm(std::uint64_t seed, std::size_t d, std::size_t n_state) {
  return SsmParams<double>::init(Rng(seed), "ssm", d, n_state);
}

BlockParams<double> block(MixerKind kind, std::uint64_t seed, std::size_t d, bool use_mlp) {
  const Rng rng(seed);
  BlockParams<double> p;
  p.kind = kind;
  p.swa = SwaParams<double>::init(rng, "b.swa", d, 3);
  p.ssm = SsmParams<double>::init(rng, "b.ssm", d, 3);
  // Non-identity norms so LN gradients are exercised.
  p.ln_mix = {rng.stream("b.ln_mix.g").normal_tensor<double>({d}, 0.3), rng.stream("b.ln_mix.b").normal_tensor<double>({d}, 0.3)};
  for (auto& v : p.ln_mix.gain.data()) v += 1.0;
  p.use_intermediate_mlp = use_mlp;
  p.ln_mlp = {rng.stream("b.ln_mlp.g").normal_tensor<double>({d}, 0.3), rng.stream("b.ln_mlp.b").normal_tensor<double>({d}, 0.3)};
  for (auto& v : p.ln_mlp.gain.data()) v += 1.0;
  p.mlp = MlpParams<double>::init(rng, "b.mlp", d, 2 * d);
  p.mlp.b_in = rng.stream("b.mlp.b_in").normal_tensor<double>({2 * d}, 0.1);
  p.mlp.b_out = rng.stream("b.mlp.b_out").normal_tensor<double>({d}, 0.1);
  return p;
}

// ---- sliding-window attention ----

TEST(Swa, ZeroWindowIsValuePassthrough) {
  const D x = randn(1, {9, 4});
  const auto p = swa(2, 4, 0);
  const D out = swa_forward(x, p);
  EXPECT_LT(max_abs_diff(out, oracle::naive_matmul(x, p.wv)), 1e-12);
  EXPECT_LT(max_abs_diff(oracle::naive_swa(x, p.wq, p.wk, p.wv, 0), oracle::naive_matmul(x, p.wv)), 1e-12);
}

TEST(Swa, WideWindowEqualsFullCausalAttention) {
  for (std::size_t n : {1u, 2u, 7u, 20u}) {
    const D x = randn(10 + n, {n, 6});
    for (std::size_t w : {n - 1, n, n + 5}) {
      const auto p = swa(3, 6, w);
      EXPECT_LT(max_abs_diff(swa_forward(x, p), oracle::full_causal_attention(x, p.wq, p.wk, p.wv)), 1e-12)
          << "n=" << n << " w=" << w;
    }
  }
}

TEST(Swa, MatchesLoopOracle) {
  const D x = randn(4, {16, 8});
  const auto p = swa(5, 8, 4);
  EXPECT_LT(max_abs_diff(swa_forward(x, p), oracle::naive_swa(x, p.wq, p.wk, p.wv, 4)), 1e-12);
}

TEST(Swa, KeysOutsideWindowHaveNoEffect) {
  const D x = randn(6, {12, 4});
  const auto p = swa(7, 4, 3);
  const D base = swa_forward(x, p);
  // Row 2 is visible to rows 2..5 only.
  const D out = swa_forward(perturbed(x, 2, 1, 0.5), p);
  EXPECT_TRUE(rows_identical(base, out, 0, 2));
  EXPECT_FALSE(rows_identical(base, out, 2, 6));
  EXPECT_TRUE(rows_identical(base, out, 6, 12));
}

// ---- selective SSM ----

TEST(Ssm, ZeroInputGivesZeroOutput) {
  const auto p = ssm(8, 5, 4);
  const D out = ssm_forward(D({10, 5}, 0.0), p);
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(max_abs_diff(oracle::naive_ssm(D({10, 5}, 0.0), p.wa, p.wb, p.wc), D({10, 5}, 0.0)), 0.0);
}

TEST(Ssm, SingleStepByHand) {
  // d = 1, N = 2, x = 2: b = [2, 6], c = [4, -2], h = b x = [4, 12], y = c . h = -8.
  SsmParams<double> p{D::matrix({{0.5, -1.0}}), D::matrix({{1.0, 3.0}}), D::matrix({{2.0, -1.0}})};
  const D out = ssm_forward(D::matrix({{2.0}}), p);
  EXPECT_EQ(out[0], -8.0);
}

TEST(Ssm, TwoStepsByHand) {
  // Second step: a = sigmoid(x W_A) with x = 1 gives sigmoid(0.5), sigmoid(-1).
  SsmParams<double> p{D::matrix({{0.5, -1.0}}), D::matrix({{1.0, 3.0}}), D::matrix({{2.0, -1.0}})};
  const D out = ssm_forward(D::matrix({{2.0}, {1.0}}), p);
  const double a0 = 1.0 / (1.0 + std::exp(-0.5)), a1 = 1.0 / (1.0 + std::exp(1.0));
  const double h0 = a0 * 4.0 + 1.0, h1 = a1 * 12.0 + 3.0;
  EXPECT_NEAR(out[1], 2.0 * h0 - h1, 1e-15);
}

TEST(Ssm, MatchesLoopOracle) {
  const D x = randn(9, {12, 4});
  const auto p = ssm(10, 4, 3);
  EXPECT_LT(max_abs_diff(ssm_forward(x, p), oracle::naive_ssm(x, p.wa, p.wb, p.wc)), 1e-12);
}

TEST(Ssm, LongSequenceStaysFinite) {
  const D x = randn(11, {4096, 8}, 3.0);
  const auto p = ssm(12, 8, 16);
  EXPECT_TRUE(ssm_forward(x, p).all_finite());
  SsmState<double> st(8, 16);
  for (std::size_t t = 0; t < x.rows(); ++t) st.step(x.row(t), p);
  EXPECT_TRUE(st.hidden().all_finite());
}

// ---- oracle grid ----

TEST(MixerOracleGrid, BothMixersAcrossShapes) {
  double worst_swa = 0, worst_ssm = 0, worst_full = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (std::size_t n : {1u, 5u, 17u, 64u, 128u}) {
      for (std::size_t d : {4u, 8u}) {
        const D x = randn(100 + seed, {n, d});
        for (std::size_t w : {0u, 1u, 4u, 16u}) {
          const auto p = swa(200 + seed, d, w);
          worst_swa = std::max(worst_swa, max_abs_diff(swa_forward(x, p), oracle::naive_swa(x, p.wq, p.wk, p.wv, w)));
        }
        const auto pf = swa(300 + seed, d, n);
        worst_full = std::max(worst_full, max_abs_diff(swa_forward(x, pf),
                                                       oracle::full_causal_attention(x, pf.wq, pf.wk, pf.wv)));
        for (std::size_t s : {1u, 3u, 16u}) {
          const auto p = ssm(400 + seed, d, s);
          worst_ssm = std::max(worst_ssm, max_abs_diff(ssm_forward(x, p), oracle::naive_ssm(x, p.wa, p.wb, p.wc)));
        }
      }
    }
  }
  EXPECT_LT(worst_swa, 1e-12);
  EXPECT_LT(worst_full, 1e-12);
  EXPECT_LT(worst_ssm, 1e-12);
}

// ---- block ----

TEST(LtmBlock, FlagOffReducesToMixerResidual) {
  const D x = randn(13, {10, 4});
  for (MixerKind kind : {MixerKind::kSwa, MixerKind::kSsm}) {
    auto p = block(kind, 14, 4, false);
    Graph<double> g(false);
    Var xv = g.constant(x);
    const D x2 = g.value(ag::add(g, xv, mixer_forward(g, apply(g, xv, p.ln_mix), p)));
    EXPECT_EQ(ltm_block(x, p), x2);
  }
}

// Explicit-loop layer norm and SiLU MLP, independent of the graph ops.
D manual_ln(const D& x, const LayerNormParams<double>& p) {
  D out(x.shape());
  const std::size_t d = x.cols();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mu = 0, var = 0;
    for (std::size_t j = 0; j < d; ++j) mu += x(i, j);
    mu /= static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) var += (x(i, j) - mu) * (x(i, j) - mu);
    var /= static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) out(i, j) = (x(i, j) - mu) / std::sqrt(var + 1e-5) * p.gain[j] + p.bias[j];
  }
  return out;
}

D manual_mlp(const D& x, const MlpParams<double>& p) {
  D h = oracle::naive_matmul(x, p.w_in);
  for (std::size_t i = 0; i < h.rows(); ++i)
    for (std::size_t j = 0; j < h.cols(); ++j) {
      const double z = h(i, j) + p.b_in[j];
      h(i, j) = z / (1.0 + std::exp(-z));
    }
  D out = oracle::naive_matmul(h, p.w_out);
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += p.b_out[j];
  return out;
}

D plus(const D& a, const D& b) {
  D out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

TEST(LtmBlock, EqualsManualComposition) {
  const D x = randn(15, {14, 6});
  for (MixerKind kind : {MixerKind::kSwa, MixerKind::kSsm}) {
    const auto p = block(kind, 16, 6, true);
    const D x1 = manual_ln(x, p.ln_mix);
    const D mixed = kind == MixerKind::kSwa ? oracle::naive_swa(x1, p.swa.wq, p.swa.wk, p.swa.wv, p.swa.window)
                                            : oracle::naive_ssm(x1, p.ssm.wa, p.ssm.wb, p.ssm.wc);
    const D x2 = plus(x, mixed);
    const D expected = plus(x2, manual_mlp(manual_ln(x2, p.ln_mlp), p.mlp));
    EXPECT_LT(max_abs_diff(ltm_block(x, p), expected), 1e-12) << to_string(kind);
  }
}

TEST(LtmBlock, CausalUnderPerturbation) {
  const D x = randn(17, {20, 4});
  for (MixerKind kind : {MixerKind::kSwa, MixerKind::kSsm}) {
    for (bool mlp : {false, true}) {
      const auto p = block(kind, 18, 4, mlp);
      const D base = ltm_block(x, p);
      for (std::size_t t : {0u, 7u, 19u}) {
        const D out = ltm_block(perturbed(x, t, 2, 0.75), p);
        EXPECT_TRUE(rows_identical(base, out, 0, t)) << to_string(kind) << " t=" << t;
        EXPECT_FALSE(rows_identical(base, out, t, t + 1));
      }
    }
  }
}

// ---- incremental ----

TEST(MixerStep, SwaStepsReproduceBatch) {
  for (std::size_t w : {0u, 1u, 5u, 64u}) {
    const D x = randn(19, {256, 8});
    const auto p = swa(20, 8, w);
    const D batch = swa_forward(x, p);
    SwaState<double> st(8, w);
    double worst = 0;
    for (std::size_t t = 0; t < x.rows(); ++t) {
      const D y = st.step(x.row(t), p);
      for (std::size_t c = 0; c < 8; ++c) worst = std::max(worst, std::abs(y[c] - batch(t, c)));
      EXPECT_EQ(st.buffered_rows(), std::min(t + 1, w));
    }
    EXPECT_LT(worst, 1e-12) << "w=" << w;
  }
}

TEST(MixerStep, SsmStepsReproduceBatch) {
  const D x = randn(21, {256, 8});
  const auto p = ssm(22, 8, 16);
  const D batch = ssm_forward(x, p);
  SsmState<double> st(8, 16);
  double worst = 0;
  for (std::size_t t = 0; t < x.rows(); ++t) {
    const D y = st.step(x.row(t), p);
    for (std::size_t c = 0; c < 8; ++c) worst = std::max(worst, std::abs(y[c] - batch(t, c)));
  }
  EXPECT_LT(worst, 1e-12);
  EXPECT_EQ(st.position(), 256u);
}

TEST(MixerStep, BlockStepsReproduceBatch) {
  const D x = randn(23, {60, 6});
  for (MixerKind kind : {MixerKind::kSwa, MixerKind::kSsm}) {
    for (bool mlp : {false, true}) {
      const auto p = block(kind, 24, 6, mlp);
      const D batch = ltm_block(x, p);
      auto st = make_mixer_state(p, 6);
      double worst = 0;
      for (std::size_t t = 0; t < x.rows(); ++t) {
        const D y = ltm_block_step(st, x.row(t), p);
        for (std::size_t c = 0; c < 6; ++c) worst = std::max(worst, std::abs(y[c] - batch(t, c)));
      }
      EXPECT_LT(worst, 1e-12);
      EXPECT_EQ(position(st), 60u);
    }
  }
}

TEST(MixerStep, SwaRingHoldsMinOfStepsAndWindow) {
  const auto p = swa(25, 4, 7);
  SwaState<double> st(4, 7);
  const D x = randn(26, {3, 4});
  for (std::size_t t = 0; t < 3; ++t) st.step(x.row(t), p);
  EXPECT_EQ(st.buffered_rows(), 3u);
  const D y = randn(27, {20, 4});
  for (std::size_t t = 0; t < 20; ++t) st.step(y.row(t), p);
  EXPECT_EQ(st.buffered_rows(), 7u);
}

TEST(MixerStep, KindMismatchIsUsageError) {
  auto p = block(MixerKind::kSwa, 28, 4, false);
  auto st = make_mixer_state(p, 4);
  p.kind = MixerKind::kSsm;
  const D x = randn(29, {1, 4});
  EXPECT_THROW(mixer_step(st, x.row(0), p), UsageError);
}

// ---- gradients ----

TEST(MixerGradCheck, WindowedAttentionOp) {
  for (std::size_t w : {std::size_t{0}, std::size_t{2}, kUnbounded}) {
    D q = randn(30, {7, 3}), k = randn(31, {7, 3}), v = randn(32, {7, 3});
    auto f = [&](Graph<double>& g) {
      return testing::weighted_sum(g, ag::windowed_attention(g, g.leaf(q), g.leaf(k), g.leaf(v), w), 33);
    };
    std::vector<D*> params{&v};
    if (w != 0) params = {&q, &k, &v};
    EXPECT_LT(grad_check(f, params).max_rel_error, 1e-4) << "w=" << w;
  }
}

TEST(MixerGradCheck, SelectiveScanOp) {
  D a = randn(34, {9, 3}), b = randn(35, {9, 3}), c = randn(36, {9, 3}), x = randn(37, {9, 4});
  for (auto& v : a.data()) v = 1.0 / (1.0 + std::exp(-v));
  auto f = [&](Graph<double>& g) {
    return testing::weighted_sum(g, ag::selective_scan(g, g.leaf(a), g.leaf(b), g.leaf(c), g.leaf(x)), 38);
  };
  EXPECT_LT(grad_check(f, {&a, &b, &c, &x}).max_rel_error, 1e-4);
}

TEST(MixerGradCheck, AllBlockParameters) {
  const D xin = randn(39, {10, 4});
  for (MixerKind kind : {MixerKind::kSwa, MixerKind::kSsm}) {
    for (bool mlp : {false, true}) {
      auto p = block(kind, 40, 4, mlp);
      D x = xin;
      std::vector<D*> params{&x};
      p.visit("", [&](const std::string&, D& t) { params.push_back(&t); });
      auto f = [&](Graph<double>& g) { return testing::weighted_sum(g, ltm_block(g, g.leaf(x), p), 41); };
      const auto rep = grad_check(f, params);
      EXPECT_LT(rep.max_rel_error, 1e-4) << to_string(kind) << " mlp=" << mlp << " tensor " << rep.worst_tensor
                                         << " index " << rep.worst_index;
    }
  }
}

}  // namespace
}  // namespace scout

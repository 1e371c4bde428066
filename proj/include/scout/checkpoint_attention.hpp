// Copyright 2026 The scout-layer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "scout/autodiff.hpp"
#include "scout/kv_ring.hpp"
#include "scout/rng.hpp"

namespace scout {

/// Projections of the checkpoint attention stage and the checkpoint interval k.
template <Real T>
struct AttnParams {
  Tensor<T> wq;
  Tensor<T> wk;
  Tensor<T> wv;
  std::size_t interval = 1;

  static AttnParams init(const Rng& rng, const std::string& prefix, std::size_t d, std::size_t interval) {
    return {init_weight<T>(rng, prefix + ".wq", d, d), init_weight<T>(rng, prefix + ".wk", d, d),
            init_weight<T>(rng, prefix + ".wv", d, d), interval};
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".wq", wq);
    f(prefix + ".wk", wk);
    f(prefix + ".wv", wv);
  }
  template <class F>
  void visit(const std::string& prefix, F&& f) const {
    f(prefix + ".wq", wq);
    f(prefix + ".wk", wk);
    f(prefix + ".wv", wv);
  }
};

/// Checkpoint positions {k, 2k, ..., floor(n/k) k}, 1-indexed.
inline std::vector<std::size_t> checkpoint_indices(std::size_t n, std::size_t k) {
  if (k < 1) throw ConfigError("checkpoint interval must be >= 1");
  std::vector<std::size_t> idx;
  idx.reserve(n / k);
  for (std::size_t p = k; p <= n; p += k) idx.push_back(p);
  return idx;
}

namespace detail {
inline std::vector<std::size_t> zero_based(const std::vector<std::size_t>& idx, std::size_t n) {
  std::vector<std::size_t> out;
  out.reserve(idx.size());
  for (std::size_t p : idx) {
    if (p < 1 || p > n) {
      throw InternalError("compress: checkpoint position " + std::to_string(p) + " outside [1, " +
                          std::to_string(n) + "]");
    }
    out.push_back(p - 1);
  }
  return out;
}
}  // namespace detail

/// Selects rows of X~ at 1-indexed checkpoint positions. No pooling.
template <Real T>
Var compress(Graph<T>& g, Var xt, const std::vector<std::size_t>& idx) {
  return ag::select_rows(g, xt, detail::zero_based(idx, g.value(xt).dim(0)));
}

template <Real T>
Tensor<T> compress(const Tensor<T>& xt, const std::vector<std::size_t>& idx) {
  Graph<T> g(false);
  return g.value(compress(g, g.constant(xt), idx));
}

/// allowed(t, j) for 0-based token row t and checkpoint j: position_j <= t + 1.
struct CheckpointMask {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<char> allowed;

  bool operator()(std::size_t t, std::size_t j) const { return allowed[t * m + j] != 0; }

  std::size_t allowed_count() const {
    std::size_t c = 0;
    for (char a : allowed) c += a != 0;
    return c;
  }
};

inline CheckpointMask causal_checkpoint_mask(std::size_t n, const std::vector<std::size_t>& idx) {
  CheckpointMask mask{n, idx.size(), std::vector<char>(n * idx.size(), 0)};
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t j = 0; j < idx.size(); ++j) mask.allowed[t * idx.size() + j] = idx[j] <= t + 1;
  return mask;
}

/// Additive form of the mask: 0 where allowed, the most negative finite value where not.
template <Real T>
Tensor<T> additive_mask(const CheckpointMask& mask) {
  Tensor<T> out({mask.n, mask.m});
  for (std::size_t t = 0; t < mask.n; ++t)
    for (std::size_t j = 0; j < mask.m; ++j) out(t, j) = mask(t, j) ? T(0) : std::numeric_limits<T>::lowest();
  return out;
}

/// Intermediate values of checkpoint attention, for inspection.
template <Real T>
struct ScoutScores {
  Tensor<T> a_comp;  ///< [n x m] masked Q K_C^T
  Tensor<T> d_self;  ///< [n] Q_t . K_t
  Tensor<T> weights; ///< [n x (m+1)] softmax([A_comp | D_self] / sqrt(d))
};

namespace detail {

template <Real T>
struct ScoutVars {
  Var a_comp, d_self, weights, out;
};

template <Real T>
ScoutVars<T> scout_attention_vars(Graph<T>& g, Var xt, const AttnParams<T>& p) {
  const std::size_t n = g.value(xt).dim(0);
  const std::size_t d = g.value(xt).dim(1);
  const auto idx = checkpoint_indices(n, p.interval);
  const std::size_t m = idx.size();

  Var q = ag::matmul(g, xt, g.leaf(p.wq));
  Var k = ag::matmul(g, xt, g.leaf(p.wk));
  Var v = ag::matmul(g, xt, g.leaf(p.wv));
  const auto rows = zero_based(idx, n);
  Var kc = ag::select_rows(g, k, rows);
  Var vc = ag::select_rows(g, v, rows);

  Var a_comp = ag::add(g, ag::matmul(g, q, ag::transpose(g, kc)),
                       g.constant(additive_mask<T>(causal_checkpoint_mask(n, idx))));
  Var d_self = ag::row_dot(g, q, k);
  Var scores = ag::scale(g, ag::concat_cols(g, a_comp, d_self), T(1) / std::sqrt(static_cast<T>(d)));
  Var w = ag::softmax_rows(g, scores);
  Var w_comp = ag::slice_cols(g, w, 0, m);
  Var w_self = ag::slice_cols(g, w, m, m + 1);
  Var out = ag::add(g, ag::matmul(g, w_comp, vc), ag::scale_rows(g, v, w_self));
  return {a_comp, d_self, w, out};
}

}  // namespace detail

/// Sparse causal attention over checkpoint tokens plus a diagonal self term:
///   O = softmax([Q K_C^T + M | diag(Q K^T)] / sqrt(d)) applied to [V_C | V].
template <Real T>
Var scout_attention(Graph<T>& g, Var xt, const AttnParams<T>& p) {
  return detail::scout_attention_vars(g, xt, p).out;
}

template <Real T>
Tensor<T> scout_attention(const Tensor<T>& xt, const AttnParams<T>& p) {
  Graph<T> g(false);
  return g.value(scout_attention(g, g.constant(xt), p));
}

template <Real T>
ScoutScores<T> scout_scores(const Tensor<T>& xt, const AttnParams<T>& p) {
  Graph<T> g(false);
  auto vars = detail::scout_attention_vars(g, g.constant(xt), p);
  const auto& ds = g.value(vars.d_self);
  return {g.value(vars.a_comp), Tensor<T>({ds.size()}, ds.data()), g.value(vars.weights)};
}

/// Incremental-decoding store of projected checkpoint keys and values.
///
/// After `pos` tokens it holds exactly floor(pos / k) checkpoints, at
/// positions k, 2k, ..., so its size is 2 * d * floor(pos / k) scalars.
template <Real T>
class CheckpointCache {
 public:
  CheckpointCache(std::size_t d, std::size_t interval) : ring_(d, kUnbounded), interval_(interval) {
    if (interval < 1) throw ConfigError("checkpoint interval must be >= 1");
  }

  std::size_t position() const noexcept { return pos_; }
  std::size_t interval() const noexcept { return interval_; }
  std::size_t entries() const noexcept { return ring_.size(); }
  std::size_t stored_numbers() const noexcept { return ring_.stored_numbers(); }
  const std::vector<std::size_t>& positions() const noexcept { return positions_; }
  const KvRing<T>& ring() const noexcept { return ring_; }

  /// Row `t` (1-indexed) of scout_attention, given x~_t. A checkpoint row is
  /// appended before scoring, so token t sees its own checkpoint.
  Tensor<T> step(std::span<const T> xt, const AttnParams<T>& p, std::size_t t, OpCounter* counter = nullptr) {
    if (t != pos_ + 1) {
      throw UsageError("checkpoint cache: expected position " + std::to_string(pos_ + 1) + ", got " +
                       std::to_string(t));
    }
    if (p.interval != interval_) throw UsageError("checkpoint cache: interval does not match parameters");
    const Tensor<T> q = vecmat(xt, p.wq);
    const Tensor<T> k = vecmat(xt, p.wk);
    const Tensor<T> v = vecmat(xt, p.wv);
    if (t % interval_ == 0) {
      ring_.push(k.data(), v.data());
      positions_.push_back(t);
    }
    Tensor<T> out = attend_with_self<T>(q.data(), ring_, k.data(), v.data(), counter);
    pos_ = t;
    return out;
  }

 private:
  KvRing<T> ring_;
  std::vector<std::size_t> positions_;
  std::size_t interval_;
  std::size_t pos_ = 0;
};

template <Real T>
Tensor<T> scout_attention_step(CheckpointCache<T>& cache, std::span<const T> xt, const AttnParams<T>& p,
                               std::size_t t, OpCounter* counter = nullptr) {
  return cache.step(xt, p, t, counter);
}

}  // namespace scout

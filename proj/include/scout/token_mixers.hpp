// Copyright 2026 The scout-layer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "scout/autodiff.hpp"
#include "scout/kv_ring.hpp"
#include "scout/nn.hpp"
#include "scout/rng.hpp"

namespace scout {

enum class MixerKind { kSwa, kSsm };

inline const char* to_string(MixerKind k) { return k == MixerKind::kSwa ? "swa" : "ssm"; }

/// Causal sliding-window attention. Each token attends to itself and its
/// `window` predecessors.
template <Real T>
struct SwaParams {
  Tensor<T> wq;
  Tensor<T> wk;
  Tensor<T> wv;
  std::size_t window = 0;

  static SwaParams init(const Rng& rng, const std::string& prefix, std::size_t d, std::size_t window) {
    return {init_weight<T>(rng, prefix + ".wq", d, d), init_weight<T>(rng, prefix + ".wk", d, d),
            init_weight<T>(rng, prefix + ".wv", d, d), window};
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

/// Selective diagonal SSM. Decay, input and readout vectors are generated per
/// token from the input: a_t = sigmoid(x_t W_A), b_t = x_t W_B, c_t = x_t W_C.
/// Every channel carries its own N-dimensional state.
template <Real T>
struct SsmParams {
  Tensor<T> wa;
  Tensor<T> wb;
  Tensor<T> wc;

  std::size_t state_size() const { return wa.dim(1); }

  static SsmParams init(const Rng& rng, const std::string& prefix, std::size_t d, std::size_t state) {
    return {init_weight<T>(rng, prefix + ".wa", d, state), init_weight<T>(rng, prefix + ".wb", d, state),
            init_weight<T>(rng, prefix + ".wc", d, state)};
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".wa", wa);
    f(prefix + ".wb", wb);
    f(prefix + ".wc", wc);
  }
  template <class F>
  void visit(const std::string& prefix, F&& f) const {
    f(prefix + ".wa", wa);
    f(prefix + ".wb", wb);
    f(prefix + ".wc", wc);
  }
};

/// Parameters of X -> X~: mixer, its pre-norm, and the optional intermediate MLP.
template <Real T>
struct BlockParams {
  MixerKind kind = MixerKind::kSwa;
  SwaParams<T> swa;
  SsmParams<T> ssm;
  LayerNormParams<T> ln_mix;
  bool use_intermediate_mlp = true;
  LayerNormParams<T> ln_mlp;
  MlpParams<T> mlp;

  template <class Self, class F>
  static void visit_impl(Self& self, const std::string& prefix, F&& f) {
    if (self.kind == MixerKind::kSwa) {
      self.swa.visit(prefix + ".swa", f);
    } else {
      self.ssm.visit(prefix + ".ssm", f);
    }
    self.ln_mix.visit(prefix + ".ln_mix", f);
    if (self.use_intermediate_mlp) {
      self.ln_mlp.visit(prefix + ".ln_mlp", f);
      self.mlp.visit(prefix + ".mlp", f);
    }
  }
  template <class F>
  void visit(const std::string& prefix, F&& f) {
    visit_impl(*this, prefix, f);
  }
  template <class F>
  void visit(const std::string& prefix, F&& f) const {
    visit_impl(*this, prefix, f);
  }
};

namespace ag {

/// Causal windowed softmax attention over already-projected q, k, v [n x d].
/// Row t attends rows max(0, t - window) .. t. A window >= n - 1 is dense
/// causal attention.
template <Real T>
Var windowed_attention(Graph<T>& g, Var q, Var k, Var v, std::size_t window) {
  const auto& qv = g.value(q);
  const auto& kv = g.value(k);
  const auto& vv = g.value(v);
  detail::require_rank2(qv.shape(), "windowed_attention");
  detail::require_same(qv.shape(), kv.shape(), "windowed_attention");
  detail::require_same(qv.shape(), vv.shape(), "windowed_attention");
  const std::size_t n = qv.dim(0), d = qv.dim(1);
  const std::size_t span = window == kUnbounded ? n : std::min(n, window + 1);
  const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(d));
  // probs(t, i) is the weight of row start(t) + i.
  Tensor<T> probs({n, span});
  Tensor<T> out({n, d});
  auto start = [window](std::size_t t) { return (window == kUnbounded || t < window) ? 0 : t - window; };
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t s0 = start(t);
    const std::size_t len = t - s0 + 1;
    auto p = probs.row(t);
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t i = 0; i < len; ++i) {
      p[i] = kernels::dot(qv.row(t).data(), kv.row(s0 + i).data(), d) * inv_sqrt_d;
      mx = std::max(mx, p[i]);
    }
    T z = 0;
    for (std::size_t i = 0; i < len; ++i) {
      p[i] = std::exp(p[i] - mx);
      z += p[i];
    }
    auto o = out.row(t);
    for (std::size_t i = 0; i < len; ++i) {
      p[i] /= z;
      auto vr = vv.row(s0 + i);
      for (std::size_t c = 0; c < d; ++c) o[c] += p[i] * vr[c];
    }
  }
  return g.record("windowed_attention", {q, k, v}, std::move(out),
                  [q, k, v, n, d, start, inv_sqrt_d, probs = std::move(probs)](Graph<T>& g, const Tensor<T>& go) {
                    const auto& qv = g.value(q);
                    const auto& kv = g.value(k);
                    const auto& vv = g.value(v);
                    auto* gq = g.grad_target(q);
                    auto* gk = g.grad_target(k);
                    auto* gv = g.grad_target(v);
                    std::vector<T> ds;
                    for (std::size_t t = 0; t < n; ++t) {
                      const std::size_t s0 = start(t);
                      const std::size_t len = t - s0 + 1;
                      auto p = probs.row(t);
                      auto gout = go.row(t);
                      ds.assign(len, T(0));
                      T acc = 0;
                      for (std::size_t i = 0; i < len; ++i) {
                        ds[i] = kernels::dot(gout.data(), vv.row(s0 + i).data(), d);
                        acc += p[i] * ds[i];
                      }
                      for (std::size_t i = 0; i < len; ++i) {
                        const T dscore = p[i] * (ds[i] - acc) * inv_sqrt_d;
                        if (gv) {
                          auto r = gv->row(s0 + i);
                          for (std::size_t c = 0; c < d; ++c) r[c] += p[i] * gout[c];
                        }
                        if (gq) {
                          auto r = gq->row(t);
                          auto kr = kv.row(s0 + i);
                          for (std::size_t c = 0; c < d; ++c) r[c] += dscore * kr[c];
                        }
                        if (gk) {
                          auto r = gk->row(s0 + i);
                          auto qr = qv.row(t);
                          for (std::size_t c = 0; c < d; ++c) r[c] += dscore * qr[c];
                        }
                      }
                    }
                  });
}

/// Diagonal selective scan. a, b, c: [n x N]; x: [n x d]; returns y: [n x d]
///   h_t[ch] = a_t * h_{t-1}[ch] + b_t * x_t[ch],   y_t[ch] = c_t . h_t[ch],   h_0 = 0.
template <Real T>
Var selective_scan(Graph<T>& g, Var a, Var b, Var c, Var x) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  const auto& cv = g.value(c);
  const auto& xv = g.value(x);
  detail::require_rank2(av.shape(), "selective_scan");
  detail::require_same(av.shape(), bv.shape(), "selective_scan");
  detail::require_same(av.shape(), cv.shape(), "selective_scan");
  detail::require_rank2(xv.shape(), "selective_scan");
  if (xv.dim(0) != av.dim(0)) {
    throw DimensionError("selective_scan: " + shape_str(xv.shape()) + " vs " + shape_str(av.shape()));
  }
  const std::size_t n = xv.dim(0), d = xv.dim(1), N = av.dim(1);
  Tensor<T> hs({n == 0 ? 1 : n, d, N});
  Tensor<T> y({n, d});
  std::vector<T> h(d * N, T(0));
  for (std::size_t t = 0; t < n; ++t) {
    auto at = av.row(t);
    auto bt = bv.row(t);
    auto ct = cv.row(t);
    for (std::size_t ch = 0; ch < d; ++ch) {
      const T xc = xv(t, ch);
      T* hc = h.data() + ch * N;
      T acc = 0;
      for (std::size_t i = 0; i < N; ++i) {
        hc[i] = at[i] * hc[i] + bt[i] * xc;
        acc += ct[i] * hc[i];
        hs(t, ch, i) = hc[i];
      }
      y(t, ch) = acc;
    }
  }
  return g.record("selective_scan", {a, b, c, x}, std::move(y),
                  [a, b, c, x, n, d, N, hs = std::move(hs)](Graph<T>& g, const Tensor<T>& go) {
                    const auto& av = g.value(a);
                    const auto& bv = g.value(b);
                    const auto& cv = g.value(c);
                    const auto& xv = g.value(x);
                    auto* ga = g.grad_target(a);
                    auto* gb = g.grad_target(b);
                    auto* gc = g.grad_target(c);
                    auto* gx = g.grad_target(x);
                    // dh carries dL/dh_t for every channel, walked backwards in time.
                    std::vector<T> dh(d * N, T(0));
                    for (std::size_t t = n; t-- > 0;) {
                      for (std::size_t ch = 0; ch < d; ++ch) {
                        T* dhc = dh.data() + ch * N;
                        const T gy = go(t, ch);
                        const T xc = xv(t, ch);
                        for (std::size_t i = 0; i < N; ++i) {
                          const T h = hs(t, ch, i);
                          if (gc) (*gc)(t, i) += gy * h;
                          dhc[i] += gy * cv(t, i);
                          const T h_prev = t > 0 ? hs(t - 1, ch, i) : T(0);
                          if (ga) (*ga)(t, i) += dhc[i] * h_prev;
                          if (gb) (*gb)(t, i) += dhc[i] * xc;
                          if (gx) (*gx)(t, ch) += dhc[i] * bv(t, i);
                          dhc[i] *= av(t, i);
                        }
                      }
                    }
                  });
}

}  // namespace ag

template <Real T>
Var swa_forward(Graph<T>& g, Var x1, const SwaParams<T>& p) {
  Var q = ag::matmul(g, x1, g.leaf(p.wq));
  Var k = ag::matmul(g, x1, g.leaf(p.wk));
  Var v = ag::matmul(g, x1, g.leaf(p.wv));
  return ag::windowed_attention(g, q, k, v, p.window);
}

template <Real T>
Var ssm_forward(Graph<T>& g, Var x1, const SsmParams<T>& p) {
  Var a = ag::sigmoid(g, ag::matmul(g, x1, g.leaf(p.wa)));
  Var b = ag::matmul(g, x1, g.leaf(p.wb));
  Var c = ag::matmul(g, x1, g.leaf(p.wc));
  return ag::selective_scan(g, a, b, c, x1);
}

template <Real T>
Var mixer_forward(Graph<T>& g, Var x1, const BlockParams<T>& p) {
  return p.kind == MixerKind::kSwa ? swa_forward(g, x1, p.swa) : ssm_forward(g, x1, p.ssm);
}

/// X1 = LN(X); X2 = X + LTM(X1); X~ = X2 + MLP(LN(X2)) when the intermediate
/// MLP is enabled, otherwise X~ = X2.
template <Real T>
Var ltm_block(Graph<T>& g, Var x, const BlockParams<T>& p) {
  Var x1 = apply(g, x, p.ln_mix);
  Var x2 = ag::add(g, x, mixer_forward(g, x1, p));
  if (!p.use_intermediate_mlp) return x2;
  return residual_mlp(g, x2, p.ln_mlp, p.mlp);
}

template <Real T>
Tensor<T> swa_forward(const Tensor<T>& x1, const SwaParams<T>& p) {
  Graph<T> g(false);
  return g.value(swa_forward(g, g.constant(x1), p));
}

template <Real T>
Tensor<T> ssm_forward(const Tensor<T>& x1, const SsmParams<T>& p) {
  Graph<T> g(false);
  return g.value(ssm_forward(g, g.constant(x1), p));
}

template <Real T>
Tensor<T> ltm_block(const Tensor<T>& x, const BlockParams<T>& p) {
  Graph<T> g(false);
  return g.value(ltm_block(g, g.constant(x), p));
}

/// Incremental SWA: keeps projected keys/values of the last `window` rows.
template <Real T>
class SwaState {
 public:
  SwaState(std::size_t d, std::size_t window) : ring_(d, window) {}

  std::size_t position() const noexcept { return pos_; }
  std::size_t buffered_rows() const noexcept { return ring_.size(); }
  const KvRing<T>& ring() const noexcept { return ring_; }

  Tensor<T> step(std::span<const T> x1, const SwaParams<T>& p, OpCounter* counter = nullptr) {
    const Tensor<T> q = vecmat(x1, p.wq);
    const Tensor<T> k = vecmat(x1, p.wk);
    const Tensor<T> v = vecmat(x1, p.wv);
    Tensor<T> out = attend_with_self<T>(q.data(), ring_, k.data(), v.data(), counter);
    ring_.push(k.data(), v.data());
    ++pos_;
    return out;
  }

 private:
  KvRing<T> ring_;
  std::size_t pos_ = 0;
};

/// Incremental selective SSM: per-channel hidden state h [d x N].
template <Real T>
class SsmState {
 public:
  SsmState(std::size_t d, std::size_t state) : h_({d, state}) {}

  std::size_t position() const noexcept { return pos_; }
  const Tensor<T>& hidden() const noexcept { return h_; }

  Tensor<T> step(std::span<const T> x1, const SsmParams<T>& p) {
    Tensor<T> a = vecmat(x1, p.wa);
    for (auto& v : a.data()) v = T(1) / (T(1) + std::exp(-v));
    const Tensor<T> b = vecmat(x1, p.wb);
    const Tensor<T> c = vecmat(x1, p.wc);
    const std::size_t d = h_.dim(0), N = h_.dim(1);
    Tensor<T> y({d});
    for (std::size_t ch = 0; ch < d; ++ch) {
      T acc = 0;
      for (std::size_t i = 0; i < N; ++i) {
        T& h = h_(ch, i);
        h = a[i] * h + b[i] * x1[ch];
        acc += c[i] * h;
      }
      y[ch] = acc;
    }
    ++pos_;
    return y;
  }

 private:
  Tensor<T> h_;
  std::size_t pos_ = 0;
};

template <Real T>
using MixerState = std::variant<SwaState<T>, SsmState<T>>;

template <Real T>
MixerState<T> make_mixer_state(const BlockParams<T>& p, std::size_t d) {
  if (p.kind == MixerKind::kSwa) return SwaState<T>(d, p.swa.window);
  return SsmState<T>(d, p.ssm.state_size());
}

template <Real T>
std::size_t position(const MixerState<T>& s) {
  return std::visit([](const auto& st) { return st.position(); }, s);
}

/// Advances the mixer by one post-LN row and returns that row's mixer output.
template <Real T>
Tensor<T> mixer_step(MixerState<T>& s, std::span<const T> x1, const BlockParams<T>& p) {
  if (p.kind == MixerKind::kSwa) {
    auto* st = std::get_if<SwaState<T>>(&s);
    if (!st) throw UsageError("mixer_step: state/param mixer kind mismatch");
    return st->step(x1, p.swa);
  }
  auto* st = std::get_if<SsmState<T>>(&s);
  if (!st) throw UsageError("mixer_step: state/param mixer kind mismatch");
  return st->step(x1, p.ssm);
}

/// Row t of ltm_block computed incrementally.
template <Real T>
Tensor<T> ltm_block_step(MixerState<T>& s, std::span<const T> x, const BlockParams<T>& p) {
  const Tensor<T> x1 = eval_row<T>(x, [&](Graph<T>& g, Var r) { return apply(g, r, p.ln_mix); });
  const Tensor<T> mixed = mixer_step(s, x1.data(), p);
  Tensor<T> x2({1, x.size()});
  for (std::size_t c = 0; c < x.size(); ++c) x2[c] = x[c] + mixed[c];
  if (!p.use_intermediate_mlp) return Tensor<T>({x.size()}, x2.data());
  Tensor<T> out = eval_row<T>(x2.data(), [&](Graph<T>& g, Var r) { return residual_mlp(g, r, p.ln_mlp, p.mlp); });
  return Tensor<T>({x.size()}, out.data());
}

}  // namespace scout

// Copyright 2026 The scout-layer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "scout/checkpoint_attention.hpp"
#include "scout/param_io.hpp"
#include "scout/token_mixers.hpp"

namespace scout {

/// Attention stage used after token mixing. kCheckpoint is the SCOUT layer;
/// the other two are dense causal and sliding-window baselines used by the
/// benchmarks.
enum class AttentionKind { kCheckpoint, kFull, kWindow };

inline const char* to_string(AttentionKind a) {
  switch (a) {
    case AttentionKind::kCheckpoint: return "checkpoint";
    case AttentionKind::kFull: return "full";
    case AttentionKind::kWindow: return "window";
  }
  return "?";
}

struct ScoutConfig {
  std::size_t d = 128;
  std::size_t n_layers = 4;
  std::size_t k = 8;
  MixerKind mixer = MixerKind::kSwa;
  std::size_t w = 64;
  std::size_t state_size = 16;
  std::size_t mlp_ratio = 4;
  bool use_intermediate_mlp = true;
  std::size_t vocab = 96;
  std::size_t max_seq = 512;
  std::uint64_t seed = 1234;
  int precision = 32;
  bool tie_embeddings = false;
  AttentionKind attention = AttentionKind::kCheckpoint;
  std::size_t attention_window = 64;

  void validate() const {
    auto positive = [](std::size_t v, const char* name) {
      if (v == 0) throw ConfigError(std::string("model.") + name + " must be positive");
    };
    positive(d, "d");
    positive(n_layers, "n_layers");
    positive(k, "k");
    positive(mlp_ratio, "mlp_ratio");
    positive(vocab, "vocab");
    positive(max_seq, "max_seq");
    if (mixer == MixerKind::kSsm) positive(state_size, "state_size");
    if (precision != 32 && precision != 64) throw ConfigError("model.precision must be 32 or 64");
  }

  std::size_t hidden() const { return mlp_ratio * d; }
};

/// Output-head init is scaled down so untrained logits are near uniform.
inline constexpr double kHeadInitGain = 0.1;

template <Real T>
struct LayerParams {
  BlockParams<T> block;
  AttnParams<T> attn;
  LayerNormParams<T> ln_out;
  MlpParams<T> mlp_out;

  static LayerParams init(const ScoutConfig& c, const Rng& rng, const std::string& prefix) {
    LayerParams p;
    p.block.kind = c.mixer;
    if (c.mixer == MixerKind::kSwa) {
      p.block.swa = SwaParams<T>::init(rng, prefix + ".block.swa", c.d, c.w);
    } else {
      p.block.ssm = SsmParams<T>::init(rng, prefix + ".block.ssm", c.d, c.state_size);
    }
    p.block.ln_mix = LayerNormParams<T>::identity(c.d);
    p.block.use_intermediate_mlp = c.use_intermediate_mlp;
    if (c.use_intermediate_mlp) {
      p.block.ln_mlp = LayerNormParams<T>::identity(c.d);
      p.block.mlp = MlpParams<T>::init(rng, prefix + ".block.mlp", c.d, c.hidden());
    }
    p.attn = AttnParams<T>::init(rng, prefix + ".attn", c.d, c.k);
    p.ln_out = LayerNormParams<T>::identity(c.d);
    p.mlp_out = MlpParams<T>::init(rng, prefix + ".mlp_out", c.d, c.hidden());
    return p;
  }

  template <class Self, class F>
  static void visit_impl(Self& self, const std::string& prefix, F&& f) {
    self.block.visit(prefix + ".block", f);
    self.attn.visit(prefix + ".attn", f);
    self.ln_out.visit(prefix + ".ln_out", f);
    self.mlp_out.visit(prefix + ".mlp_out", f);
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

template <Real T>
struct ModelParams {
  ScoutConfig config;
  Tensor<T> embed;  ///< [vocab x d]
  std::vector<LayerParams<T>> layers;
  LayerNormParams<T> ln_final;
  Tensor<T> head;  ///< [d x vocab]; empty when tied to the embedding

  static ModelParams init(const ScoutConfig& c) {
    c.validate();
    const Rng rng(c.seed);
    ModelParams p;
    p.config = c;
    p.embed = init_weight<T>(rng, "embed", c.vocab, c.d);
    for (std::size_t i = 0; i < c.n_layers; ++i) {
      p.layers.push_back(LayerParams<T>::init(c, rng, "layers." + std::to_string(i)));
    }
    p.ln_final = LayerNormParams<T>::identity(c.d);
    if (!c.tie_embeddings) p.head = init_weight<T>(rng, "head", c.d, c.vocab, kHeadInitGain);
    return p;
  }

  template <class Self, class F>
  static void visit_impl(Self& self, F&& f) {
    f(std::string("embed"), self.embed);
    for (std::size_t i = 0; i < self.layers.size(); ++i) self.layers[i].visit("layers." + std::to_string(i), f);
    self.ln_final.visit("ln_final", f);
    if (!self.config.tie_embeddings) f(std::string("head"), self.head);
  }
  template <class F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <class F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  std::vector<Tensor<T>*> tensors() {
    std::vector<Tensor<T>*> out;
    visit([&](const std::string&, Tensor<T>& t) { out.push_back(&t); });
    return out;
  }

  std::size_t count() const {
    std::size_t n = 0;
    visit([&](const std::string&, const Tensor<T>& t) { n += t.size(); });
    return n;
  }

  std::size_t bytes() const { return count() * sizeof(T); }

  void save(const std::string& path, const std::map<std::string, std::string>& meta = {}) const {
    std::vector<std::pair<std::string, const Tensor<T>*>> list;
    visit([&](const std::string& name, const Tensor<T>& t) { list.emplace_back(name, &t); });
    save_params(path, list, meta);
  }

  /// Rebuilds parameters for `c` from a loaded bundle; every tensor must be
  /// present with the expected shape.
  static ModelParams from_bundle(const ScoutConfig& c, const ParamBundle<T>& bundle) {
    ModelParams p = init(c);
    p.visit([&](const std::string& name, Tensor<T>& t) {
      const Tensor<T>* src = bundle.find(name);
      if (!src) throw IoError("param file lacks tensor " + name);
      if (src->shape() != t.shape()) {
        throw ConfigError("param " + name + " has shape " + shape_str(src->shape()) + ", config expects " +
                          shape_str(t.shape()));
      }
      t = *src;
    });
    return p;
  }
};

/// Closed-form parameter count for a configuration.
inline std::size_t param_count(const ScoutConfig& c) {
  const std::size_t d = c.d;
  const std::size_t ln = 2 * d;
  const std::size_t mlp = MlpParams<double>::param_count(d, c.hidden());
  const std::size_t mixer = c.mixer == MixerKind::kSwa ? 3 * d * d : 3 * d * c.state_size;
  std::size_t layer = mixer + ln + 3 * d * d + ln + mlp;
  if (c.use_intermediate_mlp) layer += ln + mlp;
  return c.vocab * d + c.n_layers * layer + ln + (c.tie_embeddings ? 0 : d * c.vocab);
}

/// Parameters removed by disabling the intermediate MLP (its LN and MLP, every layer).
inline std::size_t intermediate_mlp_param_count(const ScoutConfig& c) {
  return c.n_layers * (2 * c.d + MlpParams<double>::param_count(c.d, c.hidden()));
}

template <Real T>
Var attention_forward(Graph<T>& g, Var xt, const LayerParams<T>& p, const ScoutConfig& c) {
  if (c.attention == AttentionKind::kCheckpoint) return scout_attention(g, xt, p.attn);
  Var q = ag::matmul(g, xt, g.leaf(p.attn.wq));
  Var k = ag::matmul(g, xt, g.leaf(p.attn.wk));
  Var v = ag::matmul(g, xt, g.leaf(p.attn.wv));
  return ag::windowed_attention(g, q, k, v, c.attention == AttentionKind::kFull ? kUnbounded : c.attention_window);
}

/// One SCOUT layer: X~ = ltm_block(X); Y1 = attention(X~) + X~; Y = Y1 + MLP(LN(Y1)).
template <Real T>
Var layer_forward(Graph<T>& g, Var x, const LayerParams<T>& p, const ScoutConfig& c) {
  Var xt = ltm_block(g, x, p.block);
  Var y1 = ag::add(g, attention_forward(g, xt, p, c), xt);
  return residual_mlp(g, y1, p.ln_out, p.mlp_out);
}

template <Real T>
Tensor<T> layer_forward(const Tensor<T>& x, const LayerParams<T>& p, const ScoutConfig& c) {
  Graph<T> g(false);
  return g.value(layer_forward(g, g.constant(x), p, c));
}

template <Real T>
Var output_head(Graph<T>& g, Var h, const ModelParams<T>& p) {
  Var normed = apply(g, h, p.ln_final);
  if (p.config.tie_embeddings) return ag::matmul(g, normed, ag::transpose(g, g.leaf(p.embed)));
  return ag::matmul(g, normed, g.leaf(p.head));
}

/// Token ids -> logits [n x vocab].
template <Real T>
Var model_forward(Graph<T>& g, std::span<const std::size_t> ids, const ModelParams<T>& p) {
  if (ids.empty()) throw InputError("model_forward: empty token sequence");
  Var h = ag::embedding(g, g.leaf(p.embed), ids);
  for (const auto& layer : p.layers) h = layer_forward(g, h, layer, p.config);
  return output_head(g, h, p);
}

template <Real T>
Tensor<T> model_logits(std::span<const std::size_t> ids, const ModelParams<T>& p) {
  Graph<T> g(false);
  return g.value(model_forward(g, ids, p));
}

/// Mean next-token cross-entropy of `ids[1..]` given `ids[..n-1]`.
template <Real T>
Var lm_loss(Graph<T>& g, std::span<const std::size_t> ids, const ModelParams<T>& p) {
  if (ids.size() < 2) throw InputError("lm_loss: need at least two tokens");
  Var logits = model_forward(g, ids.first(ids.size() - 1), p);
  return ag::cross_entropy(g, logits, ids.subspan(1));
}

/// Dense or windowed KV cache for the baseline attention stages.
template <Real T>
class KvAttentionState {
 public:
  KvAttentionState(std::size_t d, std::size_t window) : ring_(d, window) {}

  std::size_t position() const noexcept { return pos_; }
  std::size_t entries() const noexcept { return ring_.size(); }
  std::size_t stored_numbers() const noexcept { return ring_.stored_numbers(); }

  Tensor<T> step(std::span<const T> xt, const AttnParams<T>& p, std::size_t t, OpCounter* counter) {
    if (t != pos_ + 1) throw UsageError("kv cache: position desync");
    const Tensor<T> q = vecmat(xt, p.wq);
    const Tensor<T> k = vecmat(xt, p.wk);
    const Tensor<T> v = vecmat(xt, p.wv);
    Tensor<T> out = attend_with_self<T>(q.data(), ring_, k.data(), v.data(), counter);
    ring_.push(k.data(), v.data());
    pos_ = t;
    return out;
  }

 private:
  KvRing<T> ring_;
  std::size_t pos_ = 0;
};

template <Real T>
using AttentionState = std::variant<CheckpointCache<T>, KvAttentionState<T>>;

template <Real T>
struct LayerState {
  MixerState<T> mixer;
  AttentionState<T> attention;
};

/// Per-stream incremental decoding state: one mixer state and one attention
/// cache per layer, all advanced together.
template <Real T>
class GenState {
 public:
  explicit GenState(const ModelParams<T>& p) {
    const auto& c = p.config;
    for (const auto& layer : p.layers) {
      AttentionState<T> attn = c.attention == AttentionKind::kCheckpoint
                                   ? AttentionState<T>(CheckpointCache<T>(c.d, c.k))
                                   : AttentionState<T>(KvAttentionState<T>(
                                         c.d, c.attention == AttentionKind::kFull ? kUnbounded : c.attention_window));
      layers_.push_back({make_mixer_state(layer.block, c.d), std::move(attn)});
    }
    counters_.resize(layers_.size());
  }

  std::size_t position() const noexcept { return pos_; }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  const LayerState<T>& layer(std::size_t i) const { return layers_.at(i); }
  const OpCounter& counter(std::size_t i) const { return counters_.at(i); }

  /// Cached attention rows in layer i (checkpoints for SCOUT).
  std::size_t cache_entries(std::size_t i) const {
    return std::visit([](const auto& a) { return a.entries(); }, layers_.at(i).attention);
  }
  std::size_t cache_numbers(std::size_t i) const {
    return std::visit([](const auto& a) { return a.stored_numbers(); }, layers_.at(i).attention);
  }

  /// Feeds one token and returns its logits [vocab].
  Tensor<T> step(std::size_t id, const ModelParams<T>& p) {
    const auto& c = p.config;
    if (id >= c.vocab) throw InputError("generate: token id " + std::to_string(id) + " out of range");
    const std::size_t t = pos_ + 1;
    Tensor<T> h({c.d}, p.embed.row(id));
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& lp = p.layers[i];
      auto& ls = layers_[i];
      if (scout::position<T>(ls.mixer) != pos_) throw UsageError("generate: layer state desync");
      const Tensor<T> xt = ltm_block_step<T>(ls.mixer, h.data(), lp.block);
      const Tensor<T> o = std::visit([&](auto& a) { return a.step(xt.data(), lp.attn, t, &counters_[i]); },
                                     ls.attention);
      Tensor<T> y1({1, c.d});
      for (std::size_t j = 0; j < c.d; ++j) y1[j] = o[j] + xt[j];
      const Tensor<T> y = eval_row<T>(y1.data(), [&](Graph<T>& g, Var r) {
        return residual_mlp(g, r, lp.ln_out, lp.mlp_out);
      });
      h = Tensor<T>({c.d}, y.data());
    }
    pos_ = t;
    Tensor<T> logits = eval_row<T>(h.data(), [&](Graph<T>& g, Var r) { return output_head(g, r, p); });
    return Tensor<T>({c.vocab}, logits.data());
  }

 private:
  std::vector<LayerState<T>> layers_;
  std::vector<OpCounter> counters_;
  std::size_t pos_ = 0;
};

struct Sampling {
  double temperature = 0.0;  ///< <= 0 means greedy
  std::uint64_t seed = 0;
};

template <Real T>
struct Generation {
  std::vector<std::size_t> ids;  ///< prompt followed by emitted tokens
  Tensor<T> logits;              ///< [ids.size() x vocab], row t predicts ids[t + 1]
};

template <Real T>
std::size_t argmax(std::span<const T> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

template <Real T>
std::size_t sample_token(std::span<const T> logits, const Sampling& s, Rng& rng) {
  if (s.temperature <= 0.0) return argmax(logits);
  const T mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> w(logits.size());
  double z = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(static_cast<double>(logits[i] - mx) / s.temperature);
    z += w[i];
  }
  double u = rng.uniform() * z;
  for (std::size_t i = 0; i < w.size(); ++i) {
    u -= w[i];
    if (u < 0) return i;
  }
  return w.size() - 1;
}

/// Incremental generation: feeds the prompt, then emits `steps` tokens. Every
/// emitted token is also fed, so the state ends at ids.size() positions.
template <Real T>
Generation<T> generate(const ModelParams<T>& p, std::span<const std::size_t> prompt, std::size_t steps,
                       const Sampling& sampling, GenState<T>& state) {
  if (prompt.empty()) throw InputError("generate: prompt must be nonempty");
  Rng rng(sampling.seed);
  Generation<T> out;
  std::vector<T> rows;
  auto feed = [&](std::size_t id) {
    const Tensor<T> l = state.step(id, p);
    rows.insert(rows.end(), l.data().begin(), l.data().end());
    out.ids.push_back(id);
    return l;
  };
  Tensor<T> last;
  for (std::size_t id : prompt) last = feed(id);
  for (std::size_t s = 0; s < steps; ++s) last = feed(sample_token<T>(last.data(), sampling, rng));
  out.logits = Tensor<T>({out.ids.size(), p.config.vocab}, std::span<const T>(rows));
  return out;
}

template <Real T>
Generation<T> generate(const ModelParams<T>& p, std::span<const std::size_t> prompt, std::size_t steps,
                       const Sampling& sampling = {}) {
  GenState<T> state(p);
  return generate(p, prompt, steps, sampling, state);
}

}  // namespace scout

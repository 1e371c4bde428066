// Copyright 2026 The scout-layer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Character-level language-model training: cosine schedule, AdamW with
// global-norm clipping, seeded batch sampling, held-out evaluation and an
// ablation driver over the interval, window and MLP axes.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "scout/model.hpp"
#include "scout/tokenizer.hpp"

namespace scout {

struct TrainConfig {
  double peak_lr = 3e-4;
  double weight_decay = 0.1;
  double clip_norm = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double min_lr_ratio = 0.1;
  std::size_t warmup_steps = 100;
  std::size_t total_steps = 2000;
  std::size_t batch_tokens = 512;
  std::size_t eval_interval = 250;
  std::size_t eval_chunks = 8;
  double val_fraction = 0.1;
  std::uint64_t seed = 1;

  void validate() const {
    if (total_steps == 0) throw ConfigError("train.total_steps must be positive");
    if (warmup_steps > total_steps) throw ConfigError("train.warmup_steps must not exceed train.total_steps");
    if (!(peak_lr > 0) || !std::isfinite(peak_lr)) throw ConfigError("train.peak_lr must be positive");
    if (weight_decay < 0) throw ConfigError("train.weight_decay must be nonnegative");
    if (!(clip_norm > 0)) throw ConfigError("train.clip_norm must be positive");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ConfigError("train betas must be in [0, 1)");
    if (!(eps > 0)) throw ConfigError("train.eps must be positive");
    if (!(min_lr_ratio >= 0 && min_lr_ratio <= 1)) throw ConfigError("train.min_lr_ratio must be in [0, 1]");
    if (batch_tokens == 0) throw ConfigError("train.batch_tokens must be positive");
    if (eval_chunks == 0) throw ConfigError("train.eval_chunks must be positive");
    if (!(val_fraction > 0 && val_fraction < 1)) throw ConfigError("train.val_fraction must be in (0, 1)");
  }
};

/// Linear warmup from 0 to the peak, cosine decay to peak * min_lr_ratio at
/// total_steps, constant afterwards.
inline double cosine_lr(std::size_t step, const TrainConfig& c) {
  const double peak = c.peak_lr, lo = c.peak_lr * c.min_lr_ratio;
  if (step < c.warmup_steps) return peak * static_cast<double>(step) / static_cast<double>(c.warmup_steps);
  if (step >= c.total_steps) return lo;
  const double progress =
      static_cast<double>(step - c.warmup_steps) / static_cast<double>(c.total_steps - c.warmup_steps);
  return lo + 0.5 * (peak - lo) * (1.0 + std::cos(std::numbers::pi * progress));
}

template <Real T>
struct AdamState {
  std::vector<Tensor<T>> m, v;
  std::size_t t = 0;

  explicit AdamState(const std::vector<Tensor<T>*>& params) {
    for (const auto* p : params) {
      m.emplace_back(p->shape());
      v.emplace_back(p->shape());
    }
  }
};

/// Global L2 norm over a set of gradients, accumulated in double.
template <Real T>
double global_norm(const std::vector<Tensor<T>>& grads) {
  double s = 0;
  for (const auto& g : grads)
    for (T x : g.data()) s += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(s);
}

/// One AdamW update. Gradients are clipped to clip_norm by global norm first
/// (modified in place); weight decay is decoupled and applies to matrices
/// only. Returns the pre-clip gradient norm. A non-finite gradient aborts
/// before anything is modified.
template <Real T>
double adamw_step(const std::vector<Tensor<T>*>& params, std::vector<Tensor<T>>& grads, AdamState<T>& st,
                  double lr, const TrainConfig& c) {
  if (params.size() != grads.size() || params.size() != st.m.size()) {
    throw DimensionError("adamw_step: " + std::to_string(params.size()) + " params, " +
                         std::to_string(grads.size()) + " grads, " + std::to_string(st.m.size()) + " moments");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i].shape() || params[i]->shape() != st.m[i].shape()) {
      throw DimensionError("adamw_step: shape mismatch at tensor " + std::to_string(i) + ": " +
                           shape_str(params[i]->shape()) + " vs " + shape_str(grads[i].shape()));
    }
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    for (std::size_t j = 0; j < grads[i].size(); ++j) {
      if (!std::isfinite(grads[i][j])) {
        throw NumericError("adamw_step: non-finite gradient in tensor " + std::to_string(i) + " at index " +
                           std::to_string(j) + "; step aborted");
      }
    }
  }
  const double norm = global_norm(grads);
  if (norm > c.clip_norm) {
    const T scale = static_cast<T>(c.clip_norm / norm);
    for (auto& g : grads)
      for (auto& x : g.data()) x *= scale;
  }
  st.t += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.t));
  const T b1 = static_cast<T>(c.beta1), b2 = static_cast<T>(c.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grads[i].data();
    auto m = st.m[i].data();
    auto v = st.v[i].data();
    const bool decay = params[i]->rank() >= 2 && c.weight_decay > 0;
    const T shrink = static_cast<T>(1.0 - lr * c.weight_decay);
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      const double mh = static_cast<double>(m[j]) / bc1;
      const double vh = static_cast<double>(v[j]) / bc2;
      if (decay) p[j] *= shrink;
      p[j] -= static_cast<T>(lr * mh / (std::sqrt(vh) + c.eps));
    }
  }
  return norm;
}

/// Tokenized corpus split into a training prefix and a held-out suffix.
struct Dataset {
  CharTokenizer tokenizer;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;

  /// `seq` is the training context; both splits must hold at least one
  /// sequence of seq + 1 tokens.
  static Dataset from_text(std::string_view text, double val_fraction, std::size_t seq) {
    Dataset ds;
    ds.tokenizer = CharTokenizer::from_text(text);
    const std::vector<std::size_t> ids = ds.tokenizer.encode(text);
    const auto n_val = static_cast<std::size_t>(static_cast<double>(ids.size()) * val_fraction);
    const std::size_t n_train = ids.size() - n_val;
    if (n_train < seq + 1 || n_val < seq + 1) {
      throw ConfigError("corpus too small: " + std::to_string(ids.size()) + " tokens give " +
                        std::to_string(n_train) + " train / " + std::to_string(n_val) +
                        " val, each split needs at least " + std::to_string(seq + 1));
    }
    ds.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    ds.val.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
    return ds;
  }
};

/// exp of the mean next-token cross-entropy; row i of `logits` predicts
/// targets[i].
template <Real T>
double perplexity_from_logits(const Tensor<T>& logits, std::span<const std::size_t> targets) {
  if (logits.rank() != 2 || logits.dim(0) != targets.size() || targets.empty()) {
    throw DimensionError("perplexity: " + std::to_string(targets.size()) + " targets for logits " +
                         shape_str(logits.shape()));
  }
  double total = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    auto r = logits.row(i);
    if (targets[i] >= r.size()) throw InputError("perplexity: target id out of range");
    double mx = -std::numeric_limits<double>::infinity();
    for (T v : r) mx = std::max(mx, static_cast<double>(v));
    double z = 0;
    for (T v : r) z += std::exp(static_cast<double>(v) - mx);
    total += std::log(z) + mx - static_cast<double>(r[targets[i]]);
  }
  return std::exp(total / static_cast<double>(targets.size()));
}

/// Teacher-forced perplexity of `ids`. With chunk > 0 the text is scored in
/// independent windows of chunk + 1 tokens that overlap by one token, so every
/// transition is scored exactly once.
template <Real T>
double eval_ppl(const ModelParams<T>& p, std::span<const std::size_t> ids, std::size_t chunk = 0) {
  if (ids.size() < 2) throw InputError("eval_ppl: need at least two tokens");
  const std::size_t span_len = chunk == 0 ? ids.size() - 1 : chunk;
  double total = 0;
  std::size_t count = 0;
  for (std::size_t start = 0; start + 1 < ids.size(); start += span_len) {
    const std::size_t len = std::min(span_len, ids.size() - 1 - start);
    const Tensor<T> logits = model_logits<T>(ids.subspan(start, len), p);
    const double ppl = perplexity_from_logits<T>(logits, ids.subspan(start + 1, len));
    total += std::log(ppl) * static_cast<double>(len);
    count += len;
  }
  return std::exp(total / static_cast<double>(count));
}

struct TrainRecord {
  std::size_t step = 0;
  double loss = 0;
  double lr = 0;
  double grad_norm = 0;
  double wall_ms = 0;
};

struct EvalRecord {
  std::size_t step = 0;
  double val_loss = 0;
  double val_ppl = 0;
};

inline void write_train_csv_header(std::ostream& os) { os << "step,loss,lr,grad_norm,wall_ms\n"; }

inline void write_train_csv_row(std::ostream& os, const TrainRecord& r) {
  os.precision(9);
  os << r.step << ',' << r.loss << ',' << r.lr << ',' << r.grad_norm << ',' << r.wall_ms << '\n';
}

template <Real T>
struct TrainResult {
  ModelParams<T> params;  ///< parameters after the last step
  std::vector<TrainRecord> records;
  std::vector<EvalRecord> evals;  ///< evals.front() is before any update
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_step = 0;
  bool diverged = false;
  std::string divergence;  ///< diagnostic when diverged

  double initial_val() const { return evals.empty() ? std::numeric_limits<double>::quiet_NaN() : evals.front().val_loss; }
  double final_val() const { return evals.empty() ? std::numeric_limits<double>::quiet_NaN() : evals.back().val_loss; }
};

struct TrainOptions {
  std::ostream* csv = nullptr;      ///< TrainRecord rows as they are produced
  std::ostream* log = nullptr;      ///< human-readable progress
  std::string checkpoint_path;      ///< best-by-validation parameters; empty disables
  std::map<std::string, std::string> checkpoint_meta;
  std::size_t stop_after = 0;       ///< stop after this many updates (schedule unchanged); 0 runs all
};

/// Mean validation loss over eval_chunks evenly spaced windows of max_seq + 1
/// tokens from the held-out split.
template <Real T>
double validation_loss(const ModelParams<T>& p, const Dataset& ds, const TrainConfig& tc) {
  const std::size_t seq = p.config.max_seq;
  if (ds.val.size() < seq + 1) throw ConfigError("validation split shorter than one sequence");
  const std::size_t room = ds.val.size() - seq - 1;
  double total = 0;
  for (std::size_t i = 0; i < tc.eval_chunks; ++i) {
    const std::size_t off = tc.eval_chunks == 1 ? 0 : room * i / (tc.eval_chunks - 1);
    Graph<T> g(false);
    total += static_cast<double>(g.value(lm_loss(g, std::span(ds.val).subspan(off, seq + 1), p))[0]);
  }
  return total / static_cast<double>(tc.eval_chunks);
}

/// Seeded training run. `mc.vocab` must cover the dataset's tokenizer. Each
/// step averages gradients over batch_tokens / max_seq sequences (at least
/// one) drawn at seeded random offsets. Record s holds the loss measured
/// before update s, which uses learning rate cosine_lr(s + 1). A non-finite
/// value anywhere stops the run and marks it diverged.
template <Real T>
TrainResult<T> train(const ScoutConfig& mc, const TrainConfig& tc, const Dataset& ds, const TrainOptions& opt = {}) {
  mc.validate();
  tc.validate();
  if (ds.tokenizer.size() > mc.vocab) {
    throw ConfigError("model.vocab = " + std::to_string(mc.vocab) + " is smaller than the corpus vocabulary (" +
                      std::to_string(ds.tokenizer.size()) + ")");
  }
  const std::size_t seq = mc.max_seq;
  if (ds.train.size() < seq + 1 || ds.val.size() < seq + 1) {
    throw ConfigError("corpus too small for one batch of " + std::to_string(seq + 1) + " tokens");
  }
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  auto ms = [&] { return std::chrono::duration<double, std::milli>(Clock::now() - t0).count(); };

  TrainResult<T> res;
  res.params = ModelParams<T>::init(mc);
  auto& p = res.params;
  const std::vector<Tensor<T>*> params = p.tensors();
  AdamState<T> adam(params);
  Rng batch_rng = Rng(tc.seed).stream("batches");
  const std::size_t seqs = std::max<std::size_t>(1, tc.batch_tokens / seq);
  const std::size_t room = ds.train.size() - seq - 1;

  auto evaluate = [&](std::size_t step) {
    const double vl = validation_loss(p, ds, tc);
    res.evals.push_back({step, vl, std::exp(vl)});
    if (opt.log) *opt.log << "eval step " << step << " val_loss " << vl << " ppl " << std::exp(vl) << "\n";
    if (!std::isfinite(vl)) throw NumericError("validation loss is not finite");
    if (vl < res.best_val) {
      res.best_val = vl;
      res.best_step = step;
      if (!opt.checkpoint_path.empty()) {
        auto meta = opt.checkpoint_meta;
        meta["vocab_symbols"] = ds.tokenizer.serialize();
        meta["step"] = std::to_string(step);
        meta["val_loss"] = std::to_string(vl);
        p.save(opt.checkpoint_path, meta);
      }
    }
  };

  if (opt.csv) write_train_csv_header(*opt.csv);
  try {
    evaluate(0);
    std::vector<Tensor<T>> grads;
    for (const auto* t : params) grads.emplace_back(t->shape());
    const std::size_t steps = opt.stop_after == 0 ? tc.total_steps : std::min(opt.stop_after, tc.total_steps);
    for (std::size_t s = 0; s < steps; ++s) {
      for (auto& gr : grads) gr.fill(T(0));
      double loss = 0;
      for (std::size_t b = 0; b < seqs; ++b) {
        const std::size_t off = room == 0 ? 0 : static_cast<std::size_t>(batch_rng.below(room + 1));
        Graph<T> g;
        Var l = lm_loss(g, std::span(ds.train).subspan(off, seq + 1), p);
        g.backward(l);
        loss += static_cast<double>(g.value(l)[0]);
        const T w = T(1) / static_cast<T>(seqs);
        for (std::size_t i = 0; i < params.size(); ++i) {
          if (!g.is_bound(*params[i])) continue;
          const Tensor<T> gi = g.grad_of(*params[i]);
          auto dst = grads[i].data();
          auto src = gi.data();
          for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += w * src[j];
        }
      }
      loss /= static_cast<double>(seqs);
      if (!std::isfinite(loss)) throw NumericError("training loss is not finite at step " + std::to_string(s));
      const double lr = cosine_lr(s + 1, tc);
      const double gn = adamw_step(params, grads, adam, lr, tc);
      const TrainRecord rec{s, loss, lr, gn, ms()};
      res.records.push_back(rec);
      if (opt.csv) write_train_csv_row(*opt.csv, rec);
      if (opt.log && (s % 50 == 0 || s + 1 == steps)) {
        *opt.log << "step " << s << " loss " << loss << " lr " << lr << " grad_norm " << gn << " ("
                 << static_cast<long long>(rec.wall_ms) << " ms)\n";
      }
      const std::size_t done = s + 1;
      if ((tc.eval_interval > 0 && done % tc.eval_interval == 0) || done == steps) evaluate(done);
    }
  } catch (const NumericError& e) {
    res.diverged = true;
    res.divergence = e.what();
    if (opt.log) *opt.log << "diverged: " << e.what() << "\n";
  }
  if (!res.diverged && res.final_val() > res.initial_val()) {
    res.diverged = true;
    res.divergence = "final validation loss exceeds the initial one";
  }
  return res;
}

/// One cell of the interval x window x MLP ablation grid.
struct AblationCell {
  std::size_t k = 0;
  std::size_t w = 0;
  bool mlp = false;
  std::size_t params = 0;
  double initial_val = 0;
  double final_val = 0;
  double final_train = 0;
  bool diverged = false;
  double wall_ms = 0;
};

template <Real T>
std::vector<AblationCell> run_ablation(const ScoutConfig& base, const TrainConfig& tc, const Dataset& ds,
                                       const std::vector<std::size_t>& ks, const std::vector<std::size_t>& ws,
                                       const std::vector<bool>& mlps, std::ostream* log = nullptr) {
  std::vector<AblationCell> cells;
  for (std::size_t k : ks) {
    for (std::size_t w : ws) {
      for (bool mlp : mlps) {
        ScoutConfig c = base;
        c.k = k;
        c.w = w;
        c.use_intermediate_mlp = mlp;
        if (log) *log << "ablation k=" << k << " w=" << w << " mlp=" << (mlp ? "on" : "off") << "\n";
        const TrainResult<T> r = train<T>(c, tc, ds);
        AblationCell cell{k, w, mlp, param_count(c), r.initial_val(), r.final_val(),
                          r.records.empty() ? std::numeric_limits<double>::quiet_NaN() : r.records.back().loss,
                          r.diverged, r.records.empty() ? 0.0 : r.records.back().wall_ms};
        if (log) {
          *log << "  val " << cell.initial_val << " -> " << cell.final_val << (cell.diverged ? " DIVERGED" : "")
               << "\n";
        }
        cells.push_back(cell);
      }
    }
  }
  return cells;
}

inline void write_ablation_table(std::ostream& os, const std::vector<AblationCell>& cells) {
  os << "k,w,mlp,params,initial_val_loss,final_val_loss,final_train_loss,final_val_ppl,diverged,wall_ms\n";
  os.precision(6);
  for (const auto& c : cells) {
    os << c.k << ',' << c.w << ',' << (c.mlp ? "on" : "off") << ',' << c.params << ',' << c.initial_val << ','
       << c.final_val << ',' << c.final_train << ',' << std::exp(c.final_val) << ',' << (c.diverged ? 1 : 0) << ','
       << c.wall_ms << '\n';
  }
}

}  // namespace scout

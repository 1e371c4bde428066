// Copyright 2026 The scout-layer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Acceptance suite shared by `scout check` and the acceptance test binary.
// Each criterion returns a verdict with a one-line detail; nothing here
// depends on a test framework.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "scout/bench.hpp"
#include "scout/corpus.hpp"
#include "scout/grad_check.hpp"
#include "scout/reference_oracles.hpp"
#include "scout/training.hpp"

namespace scout::verify {

struct Verdict {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0;
};

struct Options {
  bool quick = false;         ///< reduced grids and training lengths
  std::string corpus;         ///< empty: synthetic corpus
  std::ostream* log = nullptr;
  std::ostream* ablation_table = nullptr;  ///< receives the ablation CSV
};

namespace detail {

using D = Tensor<double>;
using Ids = std::vector<std::size_t>;

inline D randn(std::uint64_t seed, Shape shape, double stddev = 1.0) {
  Rng r(seed);
  return r.normal_tensor<double>(std::move(shape), stddev);
}

inline Var weighted_sum(Graph<double>& g, Var out, std::uint64_t seed) {
  return ag::sum(g, ag::mul(g, out, g.constant(randn(seed, g.shape(out)))));
}

inline bool rows_identical(const D& a, const D& b, std::size_t begin, std::size_t end) {
  for (std::size_t i = begin; i < end; ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (a(i, j) != b(i, j)) return false;
  return true;
}

inline Ids random_ids(std::uint64_t seed, std::size_t n, std::size_t vocab) {
  Rng r(seed);
  Ids ids(n);
  for (auto& id : ids) id = r.below(vocab);
  return ids;
}

/// Small two-layer model used by the model-level checks.
inline ScoutConfig tiny(MixerKind mixer, bool mlp, std::size_t k = 4, std::size_t w = 6, std::size_t d = 16) {
  ScoutConfig c;
  c.d = d;
  c.n_layers = 2;
  c.k = k;
  c.mixer = mixer;
  c.w = w;
  c.state_size = 4;
  c.mlp_ratio = 2;
  c.use_intermediate_mlp = mlp;
  c.vocab = 20;
  c.max_seq = 64;
  c.seed = 77;
  c.precision = 64;
  return c;
}

struct Variant {
  MixerKind mixer;
  bool mlp;
};

inline const std::vector<Variant>& variants() {
  static const std::vector<Variant> v = {
      {MixerKind::kSwa, true}, {MixerKind::kSwa, false}, {MixerKind::kSsm, true}, {MixerKind::kSsm, false}};
  return v;
}

inline std::string name(const Variant& v) { return std::string(to_string(v.mixer)) + (v.mlp ? "+mlp" : ""); }

inline std::string sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

/// Collects failures; the first few are kept for the detail line.
struct Tally {
  std::size_t checks = 0;
  std::size_t failures = 0;
  std::string first;

  void expect(bool ok, const std::string& what) {
    ++checks;
    if (ok) return;
    if (failures < 3) first += (first.empty() ? "" : "; ") + what;
    ++failures;
  }
  bool ok() const { return failures == 0; }
};

template <Real T>
double generation_gap(const ModelParams<T>& p, const Generation<T>& gen) {
  const Tensor<T> batch = model_logits<T>(gen.ids, p);
  double worst = 0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(batch[i]) - static_cast<double>(gen.logits[i])));
  return worst;
}

inline double oracle_gap(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t k) {
  const D x = randn(1000 * seed + n, {n, d}, 1.5);
  const auto p = AttnParams<double>::init(Rng(7000 + seed), "attn", d, k);
  return max_abs_diff(scout_attention(x, p), oracle::dense_scout_oracle(x, p.wq, p.wk, p.wv, k));
}

inline double swa_gap(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t w) {
  const D x = randn(100 + seed, {n, d});
  const auto p = SwaParams<double>::init(Rng(200 + seed), "swa", d, w);
  return max_abs_diff(swa_forward(x, p), oracle::naive_swa(x, p.wq, p.wk, p.wv, w));
}

inline double prefix_failures(const ScoutConfig& c, std::size_t n, const std::vector<std::size_t>& cuts) {
  const auto p = ModelParams<double>::init(c);
  const Ids ids = random_ids(6, n, c.vocab);
  const D full = model_logits<double>(ids, p);
  std::size_t bad = 0;
  for (std::size_t m : cuts) {
    if (m > n) continue;
    const D prefix = model_logits<double>(std::span(ids).first(m), p);
    if (!rows_identical(prefix, full, 0, m)) ++bad;
  }
  return static_cast<double>(bad);
}

inline double model_grad_error(const ScoutConfig& c, std::size_t n) {
  auto p = ModelParams<double>::init(c);
  const Ids ids = random_ids(10, n, c.vocab);
  auto f = [&](Graph<double>& g) { return weighted_sum(g, model_forward<double>(g, ids, p), 11); };
  return grad_check(f, p.tensors()).max_rel_error;
}

inline std::string load_corpus(const Options& o, std::size_t bytes = 1000000) {
  return o.corpus.empty() ? synthetic_corpus(bytes) : read_text_file(o.corpus);
}

}  // namespace detail

/// 1: checkpoint attention against the per-token oracle.
inline Verdict oracle_equivalence(const Options& o) {
  using namespace detail;
  const std::vector<std::size_t> lengths = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 15, 16, 17, 31, 32, 33, 63, 64, 65, 100, 127, 128};
  const std::uint64_t seeds = o.quick ? 5 : 20;
  double worst = 0;
  std::size_t cases = 0;
  for (std::uint64_t seed = 0; seed < seeds; ++seed)
    for (std::size_t k : {1, 2, 3, 5, 8, 16})
      for (std::size_t d : {4, 8})
        for (std::size_t n : lengths) {
          worst = std::max(worst, oracle_gap(seed, n, d, k));
          ++cases;
        }
  return {1, "oracle equivalence", worst < 1e-10,
          std::to_string(cases) + " cases, max abs diff " + sci(worst) + " (bound 1e-10)"};
}

/// 2: mixers against scalar loops, and wide-window SWA against full attention.
inline Verdict mixer_equivalence(const Options& o) {
  using namespace detail;
  const std::uint64_t seeds = o.quick ? 5 : 20;
  double worst_swa = 0, worst_ssm = 0, worst_full = 0;
  std::size_t cases = 0;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    for (std::size_t n : {1, 5, 17, 64, 128}) {
      for (std::size_t d : {4, 8}) {
        const D x = randn(100 + seed, {n, d});
        for (std::size_t w : {0, 1, 4, 16, 64}) {
          worst_swa = std::max(worst_swa, swa_gap(seed, n, d, w));
          ++cases;
        }
        for (std::size_t w : {n - 1, n, n + 3}) {
          const auto pf = SwaParams<double>::init(Rng(300 + seed), "swa", d, w);
          worst_full = std::max(worst_full, max_abs_diff(swa_forward(x, pf),
                                                         oracle::full_causal_attention(x, pf.wq, pf.wk, pf.wv)));
          ++cases;
        }
        for (std::size_t s : {1, 3, 16}) {
          const auto p = SsmParams<double>::init(Rng(400 + seed), "ssm", d, s);
          worst_ssm = std::max(worst_ssm, max_abs_diff(ssm_forward(x, p), oracle::naive_ssm(x, p.wa, p.wb, p.wc)));
          ++cases;
        }
      }
    }
  }
  const double worst = std::max({worst_swa, worst_ssm, worst_full});
  return {2, "mixer equivalence", worst < 1e-12,
          std::to_string(cases) + " cases, max abs diff swa " + sci(worst_swa) + " ssm " + sci(worst_ssm) +
              " swa-vs-full " + sci(worst_full) + " (bound 1e-12)"};
}

/// 3: central-difference gradient checks for every op, the block, the
/// layer, and the two-layer model, for both mixers and the MLP flag.
inline Verdict gradient_verification(const Options&) {
  using namespace detail;
  Tally t;
  double worst = 0;
  auto record = [&](double err, const std::string& what) {
    worst = std::max(worst, err);
    t.expect(err < 1e-4, what + " rel " + sci(err));
  };

  // Elementary ops on several shapes.
  using Op = std::function<Var(Graph<double>&, Var, Var, Var, Var)>;
  const std::vector<std::pair<const char*, Op>> ops = {
      {"matmul", [](auto& g, Var a, Var b, Var, Var) { return ag::matmul(g, a, ag::transpose(g, b)); }},
      {"add", [](auto& g, Var a, Var b, Var, Var) { return ag::add(g, a, b); }},
      {"mul", [](auto& g, Var a, Var b, Var, Var) { return ag::mul(g, a, b); }},
      {"scale", [](auto& g, Var a, Var, Var, Var) { return ag::scale(g, a, -1.7); }},
      {"silu", [](auto& g, Var a, Var, Var, Var) { return ag::silu(g, a); }},
      {"sigmoid", [](auto& g, Var a, Var, Var, Var) { return ag::sigmoid(g, a); }},
      {"concat_cols", [](auto& g, Var a, Var b, Var, Var) { return ag::concat_cols(g, a, b); }},
      {"slice_cols",
       [](auto& g, Var a, Var, Var, Var) {
         const std::size_t q = g.value(a).dim(1);
         return ag::slice_cols(g, a, q / 2, q);
       }},
      {"select_rows",
       [](auto& g, Var a, Var, Var, Var) {
         const std::size_t n = g.value(a).dim(0);
         return ag::select_rows(g, a, {n - 1, 0, n / 2, n - 1});
       }},
      {"row_dot", [](auto& g, Var a, Var b, Var, Var) { return ag::row_dot(g, a, b); }},
      {"scale_rows", [](auto& g, Var a, Var b, Var, Var) { return ag::scale_rows(g, a, ag::slice_cols(g, b, 0, 1)); }},
      {"softmax_rows", [](auto& g, Var a, Var, Var, Var) { return ag::softmax_rows(g, a); }},
      {"layer_norm", [](auto& g, Var a, Var, Var c, Var e) { return ag::layer_norm(g, a, c, e); }},
      {"add_bias", [](auto& g, Var a, Var, Var c, Var) { return ag::add_bias(g, a, c); }},
      {"transpose", [](auto& g, Var a, Var, Var, Var) { return ag::transpose(g, a); }},
      {"mean", [](auto& g, Var a, Var, Var, Var) { return ag::mean(g, a); }},
  };
  std::uint64_t seed = 100;
  for (const auto& [opname, op] : ops) {
    for (auto [n, q] : std::vector<std::pair<std::size_t, std::size_t>>{{1, 2}, {2, 3}, {4, 2}, {3, 5}, {6, 4}}) {
      D a = randn(seed++, {n, q}), b = randn(seed++, {n, q}), c = randn(seed++, {q}), e = randn(seed++, {q});
      auto f = [&](Graph<double>& g) { return weighted_sum(g, op(g, g.leaf(a), g.leaf(b), g.leaf(c), g.leaf(e)), 999); };
      record(grad_check(f, {&a, &b, &c, &e}).max_rel_error, std::string(opname));
    }
  }
  {
    D logits = randn(20, {6, 5});
    const Ids tg = {0, 4, 2, 2, 1, 3};
    auto f = [&](Graph<double>& g) { return ag::cross_entropy(g, g.leaf(logits), tg); };
    record(grad_check(f, {&logits}).max_rel_error, "cross_entropy");
  }
  {
    D table = randn(21, {7, 3});
    const Ids ids = {3, 0, 3, 6};
    auto f = [&](Graph<double>& g) { return weighted_sum(g, ag::embedding(g, g.leaf(table), ids), 22); };
    record(grad_check(f, {&table}).max_rel_error, "embedding");
  }
  for (std::size_t w : {std::size_t{0}, std::size_t{2}, kUnbounded}) {
    D q = randn(30, {7, 3}), k = randn(31, {7, 3}), v = randn(32, {7, 3});
    auto f = [&](Graph<double>& g) {
      return weighted_sum(g, ag::windowed_attention(g, g.leaf(q), g.leaf(k), g.leaf(v), w), 33);
    };
    std::vector<D*> params{&v};
    if (w != 0) params = {&q, &k, &v};
    record(grad_check(f, params).max_rel_error, "windowed_attention");
  }
  {
    D a = randn(34, {9, 3}), b = randn(35, {9, 3}), c = randn(36, {9, 3}), x = randn(37, {9, 4});
    for (auto& v : a.data()) v = 1.0 / (1.0 + std::exp(-v));
    auto f = [&](Graph<double>& g) {
      return weighted_sum(g, ag::selective_scan(g, g.leaf(a), g.leaf(b), g.leaf(c), g.leaf(x)), 38);
    };
    record(grad_check(f, {&a, &b, &c, &x}).max_rel_error, "selective_scan");
  }
  for (std::size_t k : {1, 3, 4, 20}) {
    D x = randn(27, {13, 4});
    auto p = AttnParams<double>::init(Rng(28), "attn", 4, k);
    auto f = [&](Graph<double>& g) { return weighted_sum(g, scout_attention(g, g.leaf(x), p), 29); };
    std::vector<D*> params{&p.wq, &p.wk, &p.wv, &x};
    if (k > 13) params = {&p.wv, &x};  // no checkpoints: q and k do not reach the output
    record(grad_check(f, params).max_rel_error, "scout_attention k=" + std::to_string(k));
  }
  // Full layer and two-layer model.
  for (const auto& v : variants()) {
    auto c = tiny(v.mixer, v.mlp, 8, 6, 8);
    auto p = ModelParams<double>::init(c);
    auto& lp = p.layers[0];
    D x = randn(3, {40, c.d});
    std::vector<D*> params{&x};
    lp.visit("", [&](const std::string&, D& tensor) { params.push_back(&tensor); });
    auto f = [&](Graph<double>& g) { return weighted_sum(g, layer_forward(g, g.leaf(x), lp, c), 4); };
    record(grad_check(f, params).max_rel_error, "layer " + name(v));
  }
  for (const auto& v : variants()) record(model_grad_error(tiny(v.mixer, v.mlp), 24), "model " + name(v));
  return {3, "gradient verification", t.ok(),
          std::to_string(t.checks) + " checks, max rel error " + sci(worst) + " (bound 1e-4)" +
              (t.ok() ? "" : "; " + t.first)};
}

/// 4: prefix-logit invariance and the checkpoint sparsity signature.
inline Verdict causality(const Options&) {
  using namespace detail;
  Tally t;
  const std::vector<std::size_t> cuts = {1, 2, 3, 4, 5, 8, 37, 64, 128, 200, 255};
  for (const auto& v : variants()) t.expect(prefix_failures(tiny(v.mixer, v.mlp), 256, cuts) == 0, "prefix " + name(v));
  for (std::size_t k : {1, 3, 4}) {
    const std::size_t n = 30;
    const D x = randn(17, {n, 4});
    const auto p = AttnParams<double>::init(Rng(18), "attn", 4, k);
    const D base = scout_attention(x, p);
    for (std::size_t s = 0; s < n; ++s) {
      D y = x;
      y(s, 1) += 0.3;
      const D out = scout_attention(y, p);
      const bool checkpoint = (s + 1) % k == 0;
      const std::string at = "k=" + std::to_string(k) + " t=" + std::to_string(s + 1);
      t.expect(rows_identical(base, out, 0, s), "earlier rows moved " + at);
      t.expect(!rows_identical(base, out, s, s + 1), "own row unchanged " + at);
      if (checkpoint) {
        for (std::size_t u = s + 1; u < n; ++u) t.expect(!rows_identical(base, out, u, u + 1), "checkpoint unseen " + at);
      } else {
        t.expect(rows_identical(base, out, s + 1, n), "non-checkpoint leaked " + at);
      }
    }
  }
  return {4, "causality and prefix property", t.ok(),
          std::to_string(t.checks) + " exact comparisons" + (t.ok() ? "" : "; " + t.first)};
}

/// 5: incremental decoding against batch re-scoring.
inline Verdict incremental_equivalence(const Options&) {
  using namespace detail;
  double worst64 = 0, worst32 = 0;
  Tally t;
  for (const auto& v : variants()) {
    const auto p = ModelParams<double>::init(tiny(v.mixer, v.mlp));
    GenState<double> st(p);
    const auto gen = generate<double>(p, random_ids(11, 7, 20), 505, {}, st);
    const double gap = generation_gap(p, gen);
    worst64 = std::max(worst64, gap);
    t.expect(gap < 1e-10, "double " + name(v) + " " + sci(gap));
    for (std::size_t i = 0; i < st.layer_count(); ++i) t.expect(st.cache_entries(i) == 512 / 4, "cache " + name(v));

    auto c = tiny(v.mixer, v.mlp, 4, 6, 32);
    c.precision = 32;
    const auto pf = ModelParams<float>::init(c);
    const double gf = generation_gap(pf, generate<float>(pf, random_ids(12, 5, 20), 507, {0.8, 3}));
    worst32 = std::max(worst32, gf);
    t.expect(gf < 1e-6, "float " + name(v) + " " + sci(gf));
  }
  return {5, "incremental equals batch", t.ok(),
          "n=512, max gap 64-bit " + sci(worst64) + " (bound 1e-10), 32-bit " + sci(worst32) + " (bound 1e-6)" +
              (t.ok() ? "" : "; " + t.first)};
}

/// Model used for the efficiency bench: small, so counts dominate cost.
inline ScoutConfig bench_model() {
  ScoutConfig c;
  c.d = 16;
  c.n_layers = 2;
  c.k = 16;
  c.w = 64;
  c.mlp_ratio = 2;
  c.vocab = 32;
  c.precision = 64;
  return c;
}

/// 6: exact counters, cache sizes and scaling fits over the bench grid.
inline Verdict efficiency(const Options& o, const ScoutConfig& model = bench_model()) {
  using namespace detail;
  BenchConfig b;
  b.repeats = 1;
  const auto rows = run_bench<double>(model, b, o.log);
  Tally t;
  std::uint64_t full4096 = 0, scout4096 = 0;
  for (const auto& r : rows) {
    const std::string at = std::string(to_string(r.variant)) + " n=" + std::to_string(r.n);
    t.expect(r.score_dots == r.expected_dots, "dots " + at);
    t.expect(r.cache_entries == r.expected_entries, "cache " + at);
    t.expect(r.layers_agree, "layers disagree " + at);
    if (r.variant == BenchVariant::kScout) t.expect(r.cache_entries == r.n / model.k, "floor(n/k) " + at);
    if (r.variant == BenchVariant::kFull) t.expect(r.cache_entries == r.n, "full cache " + at);
    if (r.n == 4096 && r.variant == BenchVariant::kFull) full4096 = r.score_dots;
    if (r.n == 4096 && r.variant == BenchVariant::kScout) scout4096 = r.score_dots;
  }
  const double ratio = scout4096 ? static_cast<double>(full4096) / static_cast<double>(scout4096) : 0.0;
  const double k = static_cast<double>(model.k);
  t.expect(std::abs(ratio - k) <= 0.05 * k, "ratio " + std::to_string(ratio));
  const auto fs = fit_variant(rows, BenchVariant::kScout);
  const auto ff = fit_variant(rows, BenchVariant::kFull);
  const auto fw = fit_variant(rows, BenchVariant::kSwa);
  t.expect(std::abs(fs.slope - 2.0) <= 0.05, "scout slope " + std::to_string(fs.slope));
  t.expect(std::abs(fw.slope - 1.0) <= 0.05, "swa slope " + std::to_string(fw.slope));
  // Offset between the two fitted lines at the grid's mean log n; the raw
  // intercepts extrapolate to n = 1 and pick up the small slope difference.
  double centre = 0;
  for (std::size_t n : b.lengths) centre += std::log(static_cast<double>(n));
  centre /= static_cast<double>(b.lengths.size());
  const double offset = (fs.intercept + fs.slope * centre) - (ff.intercept + ff.slope * centre);
  t.expect(std::abs(offset + std::log(k)) <= std::log(1.05), "centred offset " + std::to_string(offset));
  std::ostringstream d;
  d.precision(4);
  d << rows.size() << " rows exact; full/scout dots at n=4096 " << ratio << " (k=" << model.k << "); slopes scout "
    << fs.slope << " full " << ff.slope << " swa " << fw.slope << "; log-offset at grid centre " << offset
    << " vs -ln k " << -std::log(k) << " (raw intercept gap " << fs.intercept - ff.intercept << ")";
  return {6, "efficiency counts", t.ok(), d.str() + (t.ok() ? "" : "; " + t.first)};
}

/// 7: training smoke run on the default desk config.
inline Verdict training_smoke(const Options& o) {
  using namespace detail;
  ScoutConfig mc;
  TrainConfig tc;
  if (o.quick) {
    mc.d = 32;
    mc.n_layers = 2;
    mc.max_seq = 128;
    tc.total_steps = 150;
    tc.warmup_steps = 15;
    tc.batch_tokens = 128;
    tc.eval_interval = 50;
    tc.peak_lr = 3e-3;
  }
  const Dataset ds = Dataset::from_text(load_corpus(o, o.quick ? 200000 : 1000000), tc.val_fraction, mc.max_seq);
  mc.vocab = std::max(mc.vocab, ds.tokenizer.size());
  TrainOptions opt;
  opt.log = o.log;
  const auto r = train<float>(mc, tc, ds, opt);
  Tally t;
  const double ln_v = std::log(static_cast<double>(mc.vocab));
  const double step0 = r.records.empty() ? NAN : r.records.front().loss;
  t.expect(std::abs(step0 - ln_v) <= 0.2, "step-0 loss " + std::to_string(step0) + " vs ln V " + std::to_string(ln_v));
  t.expect(!r.diverged, "diverged: " + r.divergence);
  const double ratio = r.final_val() / r.initial_val();
  t.expect(ratio <= 0.7, "val ratio " + std::to_string(ratio));
  for (const auto& rec : r.records) t.expect(std::isfinite(rec.grad_norm), "grad norm at " + std::to_string(rec.step));
  // Replay a prefix of the run bit for bit.
  TrainOptions replay;
  replay.stop_after = std::min<std::size_t>(100, tc.total_steps);
  const auto r2 = train<float>(mc, tc, ds, replay);
  bool same = r2.records.size() == replay.stop_after;
  for (std::size_t i = 0; same && i < r2.records.size(); ++i) {
    same = r2.records[i].loss == r.records[i].loss && r2.records[i].grad_norm == r.records[i].grad_norm;
  }
  t.expect(same, "trajectory not reproducible");
  std::ostringstream d;
  d.precision(4);
  d << (o.quick ? "reduced config, " : "") << tc.total_steps << " steps, step-0 loss " << step0 << " (ln V " << ln_v
    << "), val loss " << r.initial_val() << " -> " << r.final_val() << " (ratio " << ratio
    << ", bound 0.7), first " << replay.stop_after << " steps replayed bit-exact: " << (same ? "yes" : "no");
  return {7, "training smoke run", t.ok(), d.str() + (t.ok() ? "" : "; " + t.first)};
}

/// Base model for the ablation grid; k, w and the MLP flag vary per cell.
inline ScoutConfig ablation_base() {
  ScoutConfig c;
  c.d = 64;
  c.n_layers = 2;
  c.max_seq = 256;
  return c;
}

inline TrainConfig ablation_train() {
  TrainConfig tc;
  tc.total_steps = 300;
  tc.warmup_steps = 30;
  tc.batch_tokens = 256;
  tc.eval_interval = 100;
  tc.eval_chunks = 4;
  tc.peak_lr = 3e-4;
  return tc;
}

/// Criteria 1-5 restated at one ablation cell's (k, w, mlp).
inline std::string cell_properties(std::size_t k, std::size_t w, bool mlp) {
  using namespace detail;
  std::string bad;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) bad += (bad.empty() ? "" : ", ") + what;
  };
  double oracle = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed)
    for (std::size_t n : {std::size_t{1}, k - 1, k, k + 1, 3 * k + 2, std::size_t{128}}) oracle = std::max(oracle, oracle_gap(seed, n, 8, k));
  expect(oracle < 1e-10, "oracle " + sci(oracle));
  double mix = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed)
    for (std::size_t n : {std::size_t{1}, w, w + 1, std::size_t{128}}) mix = std::max(mix, swa_gap(seed, n, 8, w));
  expect(mix < 1e-12, "mixer " + sci(mix));
  const ScoutConfig c = tiny(MixerKind::kSwa, mlp, k, w);
  const double ge = model_grad_error(c, 24);
  expect(ge < 1e-4, "grad " + sci(ge));
  expect(prefix_failures(c, 256, {1, k, k + 1, 100, 255}) == 0, "prefix");
  const auto p = ModelParams<double>::init(c);
  const double gap = generation_gap(p, generate<double>(p, random_ids(11, 3, c.vocab), 509));
  expect(gap < 1e-10, "incremental " + sci(gap));
  auto cf = tiny(MixerKind::kSwa, mlp, k, w, 32);
  cf.precision = 32;
  const auto pf = ModelParams<float>::init(cf);
  const double gf = generation_gap(pf, generate<float>(pf, random_ids(12, 3, cf.vocab), 509));
  expect(gf < 1e-6, "incremental32 " + sci(gf));
  return bad;
}

/// 8: the k x w x MLP grid trains without divergence and every cell passes
/// the property checks.
inline Verdict ablation(const Options& o) {
  using namespace detail;
  const Dataset ds = Dataset::from_text(load_corpus(o), ablation_train().val_fraction, ablation_base().max_seq);
  ScoutConfig base = ablation_base();
  base.vocab = std::max(base.vocab, ds.tokenizer.size());
  TrainConfig tc = ablation_train();
  std::vector<std::size_t> ks = {2, 4, 8}, ws = {32, 64};
  if (o.quick) {
    tc.total_steps = 40;
    tc.warmup_steps = 4;
    tc.eval_interval = 20;
    base.d = 32;
    base.max_seq = 128;
    tc.batch_tokens = 128;
  }
  const auto cells = run_ablation<float>(base, tc, ds, ks, ws, {true, false}, o.log);
  if (o.ablation_table) write_ablation_table(*o.ablation_table, cells);
  Tally t;
  for (const auto& c : cells) {
    const std::string at = "k=" + std::to_string(c.k) + " w=" + std::to_string(c.w) + (c.mlp ? " mlp" : "");
    t.expect(!c.diverged && std::isfinite(c.final_val), "diverged " + at);
    const std::string props = cell_properties(c.k, c.w, c.mlp);
    t.expect(props.empty(), at + ": " + props);
  }
  t.expect(cells.size() == ks.size() * ws.size() * 2, "table incomplete");
  std::ostringstream d;
  d << cells.size() << " cells x " << tc.total_steps << " steps" << (o.quick ? " (reduced)" : "")
    << ", none diverged, criteria 1-5 restated per cell";
  return {8, "ablation grid", t.ok(), t.ok() ? d.str() : t.first};
}

/// Runs one criterion, turning any exception into a failed verdict.
inline Verdict run_guarded(int id, const std::string& name, const std::function<Verdict()>& f) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = f();
  } catch (const std::exception& e) {
    v = {id, name, false, std::string("exception: ") + e.what()};
  }
  v.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return v;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Verdict(const Options&)> run;
};

inline const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> c = {
      {1, "oracle equivalence", oracle_equivalence},
      {2, "mixer equivalence", mixer_equivalence},
      {3, "gradient verification", gradient_verification},
      {4, "causality and prefix property", causality},
      {5, "incremental equals batch", incremental_equivalence},
      {6, "efficiency counts", [](const Options& o) { return efficiency(o); }},
      {7, "training smoke run", training_smoke},
      {8, "ablation grid", ablation},
  };
  return c;
}

inline std::string format(const Verdict& v) {
  std::ostringstream os;
  os.precision(3);
  os << (v.passed ? "PASS" : "FAIL") << " criterion " << v.id << " (" << v.name << "): " << v.detail << " ["
     << std::fixed << v.seconds << " s]";
  return os.str();
}

/// Runs the selected criteria (all when `ids` is empty), printing one line each.
inline bool run_all(const Options& o, std::ostream& out, const std::vector<int>& ids = {}) {
  bool ok = true;
  for (const auto& c : criteria()) {
    if (!ids.empty() && std::find(ids.begin(), ids.end(), c.id) == ids.end()) continue;
    const Verdict v = run_guarded(c.id, c.name, [&] { return c.run(o); });
    out << format(v) << std::endl;
    ok = ok && v.passed;
  }
  return ok;
}

}  // namespace scout::verify

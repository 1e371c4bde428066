// Copyright 2026 The scout-layer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Decoding benchmarks with exact bookkeeping. Each variant counts attention
// score dot products twice: in closed form and with the instrumented counter
// inside the incremental caches. The two must agree exactly.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "scout/model.hpp"

namespace scout {

enum class BenchVariant { kScout, kFull, kSwa };

inline const char* to_string(BenchVariant v) {
  switch (v) {
    case BenchVariant::kScout: return "scout";
    case BenchVariant::kFull: return "full";
    case BenchVariant::kSwa: return "swa";
  }
  return "?";
}

inline BenchVariant parse_variant(const std::string& s) {
  if (s == "scout") return BenchVariant::kScout;
  if (s == "full") return BenchVariant::kFull;
  if (s == "swa") return BenchVariant::kSwa;
  throw ConfigError("unknown bench variant '" + s + "' (expected scout, full or swa)");
}

/// Attention score dot products for decoding n tokens, per layer.
/// scout: sum_t floor(t/k) + n; full: n(n+1)/2; swa: sum_t min(t, w+1).
inline std::uint64_t count_score_dots(BenchVariant v, std::uint64_t n, std::uint64_t k, std::uint64_t w) {
  switch (v) {
    case BenchVariant::kScout: {
      if (k == 0) throw ConfigError("count_score_dots: k must be positive");
      // sum_{t=1..n} floor(t/k) = k * q(q-1)/2 + q * (n - qk + 1), q = floor(n/k)
      const std::uint64_t q = n / k;
      return k * q * (q - (q > 0 ? 1 : 0)) / 2 + q * (n - q * k + 1) + n;
    }
    case BenchVariant::kFull: return n * (n + 1) / 2;
    case BenchVariant::kSwa: {
      const std::uint64_t cap = w + 1;
      if (n <= cap) return n * (n + 1) / 2;
      return cap * (cap + 1) / 2 + (n - cap) * cap;
    }
  }
  return 0;
}

/// Cached attention rows per layer after n tokens.
inline std::uint64_t expected_cache_entries(BenchVariant v, std::uint64_t n, std::uint64_t k, std::uint64_t w) {
  switch (v) {
    case BenchVariant::kScout: return n / k;
    case BenchVariant::kFull: return n;
    case BenchVariant::kSwa: return std::min(n, w);
  }
  return 0;
}

/// Model config for a variant: SCOUT uses checkpoint attention; the
/// baselines swap in dense or windowed (width w) causal attention.
inline ScoutConfig variant_config(ScoutConfig c, BenchVariant v) {
  switch (v) {
    case BenchVariant::kScout: c.attention = AttentionKind::kCheckpoint; break;
    case BenchVariant::kFull: c.attention = AttentionKind::kFull; break;
    case BenchVariant::kSwa:
      c.attention = AttentionKind::kWindow;
      c.attention_window = c.w;
      break;
  }
  return c;
}

/// Live bytes a run is predicted to need: parameters, per-layer attention
/// caches at their final size, and one layer's transient working set.
inline std::uint64_t predicted_bytes(BenchVariant v, std::uint64_t n, const ScoutConfig& c) {
  const std::uint64_t scalar = c.precision == 64 ? 8 : 4;
  const std::uint64_t cache_rows = expected_cache_entries(v, n, c.k, c.w);
  const std::uint64_t mixer_rows = c.mixer == MixerKind::kSwa ? std::min<std::uint64_t>(n, c.w) : c.state_size;
  const std::uint64_t per_layer = (2 * cache_rows + 2 * mixer_rows) * c.d;
  const std::uint64_t working = 16 * (c.hidden() + c.vocab + std::max<std::uint64_t>(cache_rows, c.w)) + 16 * c.d;
  return scalar * (param_count(c) + c.n_layers * per_layer + working);
}

struct BenchConfig {
  std::vector<std::size_t> lengths = {512, 1024, 2048, 4096};
  std::vector<BenchVariant> variants = {BenchVariant::kScout, BenchVariant::kFull, BenchVariant::kSwa};
  std::size_t repeats = 3;
  std::uint64_t max_bytes = std::uint64_t{1} << 30;

  void validate() const {
    if (lengths.empty()) throw ConfigError("bench.lengths must not be empty");
    for (auto n : lengths)
      if (n == 0) throw ConfigError("bench.lengths entries must be positive");
    if (variants.empty()) throw ConfigError("bench.variants must not be empty");
    if (repeats == 0) throw ConfigError("bench.repeats must be positive");
  }
};

struct BenchRow {
  BenchVariant variant = BenchVariant::kScout;
  std::size_t n = 0;
  std::uint64_t score_dots = 0;        ///< instrumented, per layer
  std::uint64_t expected_dots = 0;     ///< closed form, per layer
  std::uint64_t cache_entries = 0;     ///< per layer, after n tokens
  std::uint64_t expected_entries = 0;  ///< closed form
  bool layers_agree = true;            ///< every layer reported the same counts
  double wall_ms = 0;                  ///< median over repeats
  std::int64_t peak_bytes = 0;         ///< peak live tensor bytes above the starting level
  double tokens_per_s = 0;

  bool exact() const { return layers_agree && score_dots == expected_dots && cache_entries == expected_entries; }
};

/// Decodes n tokens from a one-token prompt (greedy, every token fed back)
/// `repeats` times and reports median wall time plus exact counters from the
/// last run.
template <Real T>
BenchRow measure(BenchVariant v, std::size_t n, const ScoutConfig& base, std::size_t repeats,
                 std::uint64_t max_bytes) {
  if (n == 0) throw ConfigError("bench: n must be positive");
  if (repeats == 0) throw ConfigError("bench: repeats must be positive");
  const ScoutConfig c = variant_config(base, v);
  c.validate();
  const std::uint64_t need = predicted_bytes(v, n, c);
  if (need > max_bytes) {
    throw ConfigError("bench: " + std::string(to_string(v)) + " at n=" + std::to_string(n) + " needs about " +
                      std::to_string(need) + " bytes, above bench.max_bytes = " + std::to_string(max_bytes));
  }
  const ModelParams<T> p = ModelParams<T>::init(c);
  BenchRow row;
  row.variant = v;
  row.n = n;
  row.expected_dots = count_score_dots(v, n, c.k, c.w);
  row.expected_entries = expected_cache_entries(v, n, c.k, c.w);
  const std::vector<std::size_t> prompt = {0};
  std::vector<double> times;
  for (std::size_t r = 0; r < repeats; ++r) {
    const std::int64_t live0 = MemoryTracker::live();
    MemoryTracker::reset_peak();
    GenState<T> state(p);
    const auto t0 = std::chrono::steady_clock::now();
    generate<T>(p, prompt, n - 1, Sampling{}, state);
    times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    row.peak_bytes = MemoryTracker::peak() - live0;
    row.score_dots = state.counter(0).score_dots;
    row.cache_entries = state.cache_entries(0);
    row.layers_agree = true;
    for (std::size_t i = 1; i < state.layer_count(); ++i) {
      row.layers_agree = row.layers_agree && state.counter(i).score_dots == row.score_dots &&
                         state.cache_entries(i) == row.cache_entries;
    }
  }
  std::sort(times.begin(), times.end());
  row.wall_ms = times.size() % 2 ? times[times.size() / 2]
                                 : 0.5 * (times[times.size() / 2 - 1] + times[times.size() / 2]);
  row.tokens_per_s = row.wall_ms > 0 ? 1000.0 * static_cast<double>(n) / row.wall_ms : 0.0;
  return row;
}

template <Real T>
std::vector<BenchRow> run_bench(const ScoutConfig& c, const BenchConfig& b, std::ostream* log = nullptr) {
  b.validate();
  std::vector<BenchRow> rows;
  for (BenchVariant v : b.variants) {
    for (std::size_t n : b.lengths) {
      rows.push_back(measure<T>(v, n, c, b.repeats, b.max_bytes));
      if (log) {
        const auto& r = rows.back();
        *log << to_string(v) << " n=" << n << " dots=" << r.score_dots << " cache=" << r.cache_entries << " "
             << r.wall_ms << " ms" << (r.exact() ? "" : "  COUNT MISMATCH") << "\n";
      }
    }
  }
  return rows;
}

inline void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows) {
  os << "variant,n,score_dots,cache_entries,wall_ms,peak_bytes\n";
  for (const auto& r : rows) {
    os << to_string(r.variant) << ',' << r.n << ',' << r.score_dots << ',' << r.cache_entries << ',' << r.wall_ms
       << ',' << r.peak_bytes << '\n';
  }
}

/// Least-squares line through (log x, log y).
struct LogLogFit {
  double slope = 0;
  double intercept = 0;
};

inline LogLogFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw UsageError("loglog_fit: need at least two matching points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0 && y[i] > 0)) throw UsageError("loglog_fit: values must be positive");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {slope, (sy - slope * sx) / n};
}

/// Fit of score_dots against n for one variant's rows.
inline LogLogFit fit_variant(const std::vector<BenchRow>& rows, BenchVariant v) {
  std::vector<double> x, y;
  for (const auto& r : rows) {
    if (r.variant != v) continue;
    x.push_back(static_cast<double>(r.n));
    y.push_back(static_cast<double>(r.score_dots));
  }
  return loglog_fit(x, y);
}

}  // namespace scout

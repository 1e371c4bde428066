// Copyright 2026 The scout-layer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Run configuration files.
//
//   # comment (also after a value)
//   [model]
//   d = 128
//   mixer = swa            # swa | ssm
//   [train]
//   corpus = data/book.txt # empty: built-in synthetic prose
//   [bench]
//   lengths = 512, 1024, 2048, 4096
//
// Keys outside a section, unknown sections, unknown keys, repeated keys and
// malformed values are all config errors naming the line.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "scout/bench.hpp"
#include "scout/model.hpp"
#include "scout/training.hpp"

namespace scout {

struct RunConfig {
  ScoutConfig model;
  TrainConfig train;
  BenchConfig bench;
  std::string corpus;                    ///< empty: synthetic corpus
  std::size_t synthetic_bytes = 1000000;
  std::uint64_t corpus_seed = 2024;

  void validate() const {
    model.validate();
    train.validate();
    bench.validate();
    if (corpus.empty() && synthetic_bytes == 0) throw ConfigError("train.synthetic_bytes must be positive");
  }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Ctx {
  std::string where;
  std::string key;
  std::string value;

  [[noreturn]] void fail(const std::string& why) const {
    throw ConfigError(where + ": " + key + ": " + why + " (got '" + value + "')");
  }

  std::uint64_t u64() const {
    std::uint64_t v = 0;
    const auto* end = value.data() + value.size();
    auto [p, ec] = std::from_chars(value.data(), end, v);
    if (ec != std::errc() || p != end) fail("expected a nonnegative integer");
    return v;
  }
  std::size_t size() const { return static_cast<std::size_t>(u64()); }
  double real() const {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(value, &used);
    } catch (const std::exception&) {
      fail("expected a number");
    }
    if (used != value.size()) fail("expected a number");
    return v;
  }
  bool boolean() const {
    if (value == "true" || value == "on" || value == "1") return true;
    if (value == "false" || value == "off" || value == "0") return false;
    fail("expected true/false");
  }
  std::vector<std::string> list() const {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) fail("empty list entry");
      out.push_back(item);
    }
    return out;
  }
};

using Setter = std::function<void(RunConfig&, const Ctx&)>;

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> s = {
      {"model.d", [](RunConfig& r, const Ctx& c) { r.model.d = c.size(); }},
      {"model.n_layers", [](RunConfig& r, const Ctx& c) { r.model.n_layers = c.size(); }},
      {"model.k", [](RunConfig& r, const Ctx& c) { r.model.k = c.size(); }},
      {"model.mixer",
       [](RunConfig& r, const Ctx& c) {
         if (c.value == "swa") {
           r.model.mixer = MixerKind::kSwa;
         } else if (c.value == "ssm") {
           r.model.mixer = MixerKind::kSsm;
         } else {
           c.fail("expected swa or ssm");
         }
       }},
      {"model.w", [](RunConfig& r, const Ctx& c) { r.model.w = c.size(); }},
      {"model.state_size", [](RunConfig& r, const Ctx& c) { r.model.state_size = c.size(); }},
      {"model.mlp_ratio", [](RunConfig& r, const Ctx& c) { r.model.mlp_ratio = c.size(); }},
      {"model.use_intermediate_mlp", [](RunConfig& r, const Ctx& c) { r.model.use_intermediate_mlp = c.boolean(); }},
      {"model.vocab", [](RunConfig& r, const Ctx& c) { r.model.vocab = c.size(); }},
      {"model.max_seq", [](RunConfig& r, const Ctx& c) { r.model.max_seq = c.size(); }},
      {"model.seed", [](RunConfig& r, const Ctx& c) { r.model.seed = c.u64(); }},
      {"model.precision",
       [](RunConfig& r, const Ctx& c) {
         const auto p = c.u64();
         if (p != 32 && p != 64) c.fail("expected 32 or 64");
         r.model.precision = static_cast<int>(p);
       }},
      {"model.tie_embeddings", [](RunConfig& r, const Ctx& c) { r.model.tie_embeddings = c.boolean(); }},
      {"train.peak_lr", [](RunConfig& r, const Ctx& c) { r.train.peak_lr = c.real(); }},
      {"train.weight_decay", [](RunConfig& r, const Ctx& c) { r.train.weight_decay = c.real(); }},
      {"train.clip_norm", [](RunConfig& r, const Ctx& c) { r.train.clip_norm = c.real(); }},
      {"train.beta1", [](RunConfig& r, const Ctx& c) { r.train.beta1 = c.real(); }},
      {"train.beta2", [](RunConfig& r, const Ctx& c) { r.train.beta2 = c.real(); }},
      {"train.eps", [](RunConfig& r, const Ctx& c) { r.train.eps = c.real(); }},
      {"train.min_lr_ratio", [](RunConfig& r, const Ctx& c) { r.train.min_lr_ratio = c.real(); }},
      {"train.warmup_steps", [](RunConfig& r, const Ctx& c) { r.train.warmup_steps = c.size(); }},
      {"train.total_steps", [](RunConfig& r, const Ctx& c) { r.train.total_steps = c.size(); }},
      {"train.batch_tokens", [](RunConfig& r, const Ctx& c) { r.train.batch_tokens = c.size(); }},
      {"train.eval_interval", [](RunConfig& r, const Ctx& c) { r.train.eval_interval = c.size(); }},
      {"train.eval_chunks", [](RunConfig& r, const Ctx& c) { r.train.eval_chunks = c.size(); }},
      {"train.val_fraction", [](RunConfig& r, const Ctx& c) { r.train.val_fraction = c.real(); }},
      {"train.seed", [](RunConfig& r, const Ctx& c) { r.train.seed = c.u64(); }},
      {"train.corpus", [](RunConfig& r, const Ctx& c) { r.corpus = c.value; }},
      {"train.synthetic_bytes", [](RunConfig& r, const Ctx& c) { r.synthetic_bytes = c.size(); }},
      {"train.corpus_seed", [](RunConfig& r, const Ctx& c) { r.corpus_seed = c.u64(); }},
      {"bench.lengths",
       [](RunConfig& r, const Ctx& c) {
         r.bench.lengths.clear();
         for (const auto& item : c.list()) {
           Ctx sub = c;
           sub.value = item;
           r.bench.lengths.push_back(sub.size());
         }
       }},
      {"bench.variants",
       [](RunConfig& r, const Ctx& c) {
         r.bench.variants.clear();
         for (const auto& item : c.list()) {
           try {
             r.bench.variants.push_back(parse_variant(item));
           } catch (const ConfigError& e) {
             c.fail(e.what());
           }
         }
       }},
      {"bench.repeats", [](RunConfig& r, const Ctx& c) { r.bench.repeats = c.size(); }},
      {"bench.max_bytes", [](RunConfig& r, const Ctx& c) { r.bench.max_bytes = c.u64(); }},
  };
  return s;
}

}  // namespace config_detail

/// Parses config text; `source` names it in diagnostics.
inline RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>") {
  using namespace config_detail;
  static const std::set<std::string> sections = {"model", "train", "bench"};
  RunConfig rc;
  std::set<std::string> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno);
    std::string line = raw;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (!sections.contains(section)) throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": missing key");
    if (section.empty()) throw ConfigError(where + ": key '" + key + "' appears before any [section]");
    const std::string full = section + "." + key;
    const auto it = setters().find(full);
    if (it == setters().end()) throw ConfigError(where + ": unknown key '" + key + "' in [" + section + "]");
    if (!seen.insert(full).second) throw ConfigError(where + ": key '" + key + "' set twice in [" + section + "]");
    it->second(rc, Ctx{where, full, trim(line.substr(eq + 1))});
  }
  try {
    rc.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path);
}

}  // namespace scout

// Copyright 2026 The scout-layer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Seeded generator of English-like prose, used when no corpus file is given.
// Sentences follow a small phrase grammar over fixed word lists with
// skewed word frequencies, so the text has real character, word and phrase
// level structure for a character model to learn.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "scout/errors.hpp"
#include "scout/rng.hpp"

namespace scout {

namespace corpus_detail {

using Words = std::vector<std::string_view>;

inline const Words& nouns() {
  static const Words w = {"house",  "river",  "garden", "letter", "morning", "window", "road",   "city",
                          "friend", "mother", "father", "sister", "brother", "child",  "horse",  "ship",
                          "book",   "table",  "door",   "field",  "forest",  "hill",   "village", "market",
                          "king",   "queen",  "soldier", "doctor", "teacher", "family", "evening", "winter",
                          "summer", "storm",  "light",  "voice",  "question", "answer", "story", "journey",
                          "bridge", "tower",  "stone",  "fire",   "water",   "bread",  "candle", "picture"};
  return w;
}
inline const Words& adjectives() {
  static const Words w = {"old",   "young", "small",  "great", "quiet", "bright", "dark",   "cold",
                          "warm",  "long",  "short",  "happy", "tired", "strange", "gentle", "heavy",
                          "green", "grey",  "silent", "early", "late",  "little", "proud",  "faithful"};
  return w;
}
inline const Words& verbs_past() {
  static const Words w = {"saw",      "found",    "left",    "took",    "brought", "heard",  "watched",
                          "followed", "remembered", "opened", "closed", "carried", "crossed", "reached",
                          "visited",  "praised",  "answered", "wrote",  "kept",    "lost",   "met"};
  return w;
}
inline const Words& verbs_intrans() {
  static const Words w = {"waited", "laughed", "smiled", "slept", "returned", "arrived", "listened",
                          "walked", "spoke",   "wept",   "rested", "wondered", "stayed"};
  return w;
}
inline const Words& names() {
  static const Words w = {"Elizabeth", "Jane", "Thomas", "Mary", "William", "Anne", "Henry", "Clara",
                          "Edward", "Lucy", "Robert", "Emma"};
  return w;
}
inline const Words& preps() {
  static const Words w = {"in", "on", "near", "beyond", "across", "under", "behind", "towards", "through", "beside"};
  return w;
}
inline const Words& adverbs() {
  static const Words w = {"slowly", "quickly", "softly", "again", "once more", "at last", "in silence", "with care"};
  return w;
}
inline const Words& times() {
  static const Words w = {"In the morning", "That evening", "Some days later", "At first", "Before long",
                          "In the winter", "After a while", "When the storm had passed"};
  return w;
}
inline const Words& conj() {
  static const Words w = {"and", "but", "while", "because", "so", "though"};
  return w;
}

/// Index drawn with probability proportional to 1 / (rank + 1.5).
inline std::size_t zipf(Rng& rng, std::size_t n) {
  double z = 0;
  for (std::size_t i = 0; i < n; ++i) z += 1.0 / (static_cast<double>(i) + 1.5);
  double u = rng.uniform() * z;
  for (std::size_t i = 0; i < n; ++i) {
    u -= 1.0 / (static_cast<double>(i) + 1.5);
    if (u < 0) return i;
  }
  return n - 1;
}

inline std::string_view pick(Rng& rng, const Words& w) { return w[zipf(rng, w.size())]; }

inline void noun_phrase(Rng& rng, std::string& out) {
  const double u = rng.uniform();
  if (u < 0.15) {
    out += pick(rng, names());
    return;
  }
  out += rng.uniform() < 0.6 ? "the " : (rng.uniform() < 0.5 ? "a " : "his ");
  if (rng.uniform() < 0.45) {
    out += pick(rng, adjectives());
    out += ' ';
  }
  out += pick(rng, nouns());
  if (rng.uniform() < 0.2) {
    out += " of the ";
    out += pick(rng, nouns());
  }
}

inline void clause(Rng& rng, std::string& out) {
  noun_phrase(rng, out);
  out += ' ';
  if (rng.uniform() < 0.6) {
    out += pick(rng, verbs_past());
    out += ' ';
    noun_phrase(rng, out);
  } else {
    out += pick(rng, verbs_intrans());
  }
  if (rng.uniform() < 0.35) {
    out += ' ';
    out += pick(rng, preps());
    out += ' ';
    noun_phrase(rng, out);
  }
  if (rng.uniform() < 0.2) {
    out += ' ';
    out += pick(rng, adverbs());
  }
}

inline void sentence(Rng& rng, std::string& out) {
  std::string s;
  if (rng.uniform() < 0.2) {
    s += pick(rng, times());
    s += ", ";
  }
  clause(rng, s);
  if (rng.uniform() < 0.3) {
    s += ", ";
    s += pick(rng, conj());
    s += ' ';
    clause(rng, s);
  }
  if (s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  const double u = rng.uniform();
  s += u < 0.85 ? "." : (u < 0.95 ? "!" : "?");
  if (rng.uniform() < 0.1) s = "\"" + s + "\"";
  out += s;
}

}  // namespace corpus_detail

/// About `bytes` characters of seeded prose, paragraphs separated by blank lines.
inline std::string synthetic_corpus(std::size_t bytes, std::uint64_t seed = 2024) {
  using namespace corpus_detail;
  Rng rng = Rng(seed).stream("corpus");
  std::string out;
  out.reserve(bytes + 256);
  while (out.size() < bytes) {
    const std::size_t sentences = 2 + rng.below(6);
    for (std::size_t i = 0; i < sentences; ++i) {
      if (i) out += ' ';
      sentence(rng, out);
    }
    out += "\n\n";
  }
  out.resize(bytes);
  return out;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path);
  return ss.str();
}

}  // namespace scout

// Copyright 2026 The scout-layer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "scout/errors.hpp"

namespace scout {

namespace utf8 {

/// Decodes UTF-8 into code points. Malformed input is an input error.
inline std::vector<char32_t> decode(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  auto cont = [&](std::size_t j) -> char32_t {
    if (j >= s.size() || (static_cast<unsigned char>(s[j]) & 0xC0) != 0x80) {
      throw InputError("utf8: malformed sequence at byte " + std::to_string(i));
    }
    return static_cast<unsigned char>(s[j]) & 0x3F;
  };
  while (i < s.size()) {
    const auto b = static_cast<unsigned char>(s[i]);
    char32_t cp;
    std::size_t len;
    if (b < 0x80) {
      cp = b, len = 1;
    } else if ((b & 0xE0) == 0xC0) {
      cp = ((b & 0x1Fu) << 6) | cont(i + 1), len = 2;
      if (cp < 0x80) throw InputError("utf8: overlong encoding");
    } else if ((b & 0xF0) == 0xE0) {
      cp = ((b & 0x0Fu) << 12) | (cont(i + 1) << 6) | cont(i + 2), len = 3;
      if (cp < 0x800) throw InputError("utf8: overlong encoding");
    } else if ((b & 0xF8) == 0xF0) {
      cp = ((b & 0x07u) << 18) | (cont(i + 1) << 12) | (cont(i + 2) << 6) | cont(i + 3), len = 4;
      if (cp < 0x10000 || cp > 0x10FFFF) throw InputError("utf8: code point out of range");
    } else {
      throw InputError("utf8: invalid lead byte at " + std::to_string(i));
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline void append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

}  // namespace utf8

/// Character-level vocabulary: the distinct code points of a corpus, sorted.
class CharTokenizer {
 public:
  CharTokenizer() = default;

  explicit CharTokenizer(std::vector<char32_t> symbols) : symbols_(std::move(symbols)) {
    std::sort(symbols_.begin(), symbols_.end());
    symbols_.erase(std::unique(symbols_.begin(), symbols_.end()), symbols_.end());
    for (std::size_t i = 0; i < symbols_.size(); ++i) index_[symbols_[i]] = i;
  }

  static CharTokenizer from_text(std::string_view text) { return CharTokenizer(utf8::decode(text)); }

  std::size_t size() const noexcept { return symbols_.size(); }
  const std::vector<char32_t>& symbols() const noexcept { return symbols_; }

  bool covers(std::string_view text) const {
    for (char32_t cp : utf8::decode(text))
      if (!index_.contains(cp)) return false;
    return true;
  }

  std::vector<std::size_t> encode(std::string_view text) const {
    std::vector<std::size_t> ids;
    for (char32_t cp : utf8::decode(text)) {
      auto it = index_.find(cp);
      if (it == index_.end()) throw InputError("tokenizer: character U+" + hex(cp) + " not in vocabulary");
      ids.push_back(it->second);
    }
    return ids;
  }

  std::string decode(const std::vector<std::size_t>& ids) const {
    std::string out;
    for (std::size_t id : ids) {
      if (id >= symbols_.size()) throw InputError("tokenizer: id " + std::to_string(id) + " out of range");
      utf8::append(out, symbols_[id]);
    }
    return out;
  }

  /// Space-separated hex code points, for checkpoint metadata.
  std::string serialize() const {
    std::string out;
    for (std::size_t i = 0; i < symbols_.size(); ++i) {
      if (i) out.push_back(' ');
      out += hex(symbols_[i]);
    }
    return out;
  }

  static CharTokenizer deserialize(const std::string& s) {
    std::istringstream in(s);
    std::vector<char32_t> cps;
    std::string tok;
    while (in >> tok) {
      std::size_t used = 0;
      unsigned long v = 0;
      try {
        v = std::stoul(tok, &used, 16);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size() || v > 0x10FFFF) throw IoError("tokenizer: bad vocabulary entry '" + tok + "'");
      cps.push_back(static_cast<char32_t>(v));
    }
    return CharTokenizer(std::move(cps));
  }

 private:
  static std::string hex(char32_t cp) {
    std::ostringstream os;
    os << std::hex << std::uppercase << static_cast<unsigned long>(cp);
    return os.str();
  }

  std::vector<char32_t> symbols_;
  std::unordered_map<char32_t, std::size_t> index_;
};

}  // namespace scout

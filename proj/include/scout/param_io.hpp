// Copyright 2026 The scout-layer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "scout/errors.hpp"
#include "scout/tensor.hpp"

namespace scout {

// Parameter file layout:
//
//   SCOUT-PARAMS 1
//   precision <32|64>
//   meta <key> <value>                       (zero or more)
//   tensor <name> <rank> <d0> [d1 [d2]] <byte offset>
//   ...
//   end
//   <raw little-endian arrays, offsets relative to the byte after "end\n">

template <Real T>
struct NamedTensor {
  std::string name;
  Tensor<T> value;
};

template <Real T>
struct ParamBundle {
  int precision = 8 * static_cast<int>(sizeof(T));
  std::map<std::string, std::string> meta;
  std::vector<NamedTensor<T>> tensors;

  const Tensor<T>* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t.value;
    return nullptr;
  }
};

namespace detail {

template <class U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    using Bits = std::conditional_t<sizeof(U) == 4, std::uint32_t, std::uint64_t>;
    Bits b;
    std::memcpy(&b, &v, sizeof b);
    b = sizeof(U) == 4 ? static_cast<Bits>(__builtin_bswap32(static_cast<std::uint32_t>(b)))
                       : static_cast<Bits>(__builtin_bswap64(static_cast<std::uint64_t>(b)));
    std::memcpy(&v, &b, sizeof b);
  }
  return v;
}

template <class U, Real T>
void read_array(std::istream& in, Tensor<T>& out) {
  std::vector<U> buf(out.size());
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(U)));
  if (!in) throw IoError("param file: truncated data section");
  for (std::size_t i = 0; i < buf.size(); ++i) out[i] = static_cast<T>(to_little(buf[i]));
}

}  // namespace detail

template <Real T>
void save_params(const std::string& path, const std::vector<std::pair<std::string, const Tensor<T>*>>& tensors,
                 const std::map<std::string, std::string>& meta = {}) {
  std::ostringstream header;
  header << "SCOUT-PARAMS 1\n";
  header << "precision " << 8 * sizeof(T) << "\n";
  for (const auto& [k, v] : meta) {
    if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw UsageError("param file: meta key/value must not contain whitespace/newlines: " + k);
    }
    header << "meta " << k << ' ' << v << "\n";
  }
  std::size_t offset = 0;
  for (const auto& [name, t] : tensors) {
    if (name.find_first_of(" \n") != std::string::npos) {
      throw UsageError("param file: tensor name contains whitespace: " + name);
    }
    header << "tensor " << name << ' ' << t->rank();
    for (auto d : t->shape()) header << ' ' << d;
    header << ' ' << offset << "\n";
    offset += t->bytes();
  }
  header << "end\n";

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& [name, t] : tensors) {
    for (T v : t->data()) {
      const T le = detail::to_little(v);
      out.write(reinterpret_cast<const char*>(&le), sizeof le);
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

/// Loads a parameter file, converting to T when the stored precision differs.
template <Real T>
ParamBundle<T> load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  auto bad = [&](const std::string& why) { return IoError("param file " + path + ": " + why); };
  if (!std::getline(in, line) || line != "SCOUT-PARAMS 1") throw bad("missing magic line");

  ParamBundle<T> bundle;
  int precision = 0;
  struct Entry {
    std::string name;
    Shape shape;
    std::size_t offset;
  };
  std::vector<Entry> entries;
  bool ended = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "end") {
      ended = true;
      break;
    }
    if (kind == "precision") {
      ls >> precision;
      if (precision != 32 && precision != 64) throw bad("precision must be 32 or 64");
    } else if (kind == "meta") {
      std::string k, v;
      ls >> k;
      std::getline(ls >> std::ws, v);
      bundle.meta[k] = v;
    } else if (kind == "tensor") {
      Entry e;
      std::size_t rank = 0;
      ls >> e.name >> rank;
      if (!ls || rank < 1 || rank > 3) throw bad("bad tensor line: " + line);
      e.shape.resize(rank);
      for (auto& d : e.shape) ls >> d;
      ls >> e.offset;
      if (!ls) throw bad("bad tensor line: " + line);
      entries.push_back(std::move(e));
    } else {
      throw bad("unexpected header line: " + line);
    }
  }
  if (!ended) throw bad("header not terminated");
  if (precision == 0) throw bad("missing precision");

  const std::streamoff data_start = in.tellg();
  for (const auto& e : entries) {
    Tensor<T> t(e.shape);
    in.seekg(data_start + static_cast<std::streamoff>(e.offset));
    if (precision == 32) {
      detail::read_array<float>(in, t);
    } else {
      detail::read_array<double>(in, t);
    }
    bundle.tensors.push_back({e.name, std::move(t)});
  }
  bundle.precision = precision;
  return bundle;
}

}  // namespace scout

// Copyright (c) 2026 The lungseg Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>

#include "lungseg/nn/nn.hpp"

// Checkpoint file: a parameter dictionary keyed by module path plus the
// config text the model was built from. Values are raw little-endian scalars,
// so save/load round-trips bit-exactly.

namespace lungseg::nn {

namespace detail {

constexpr char kCkptMagic[8] = {'L', 'S', 'E', 'G', 'C', 'K', 'P', '1'};

inline void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace detail

template <typename S>
void save_checkpoint(const std::string& path, const ParamList<S>& params,
                     const std::string& config_text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(detail::kCkptMagic, sizeof(detail::kCkptMagic));
  detail::write_u64(os, config_text.size());
  os.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));
  detail::write_u64(os, params.size());
  for (const auto& p : params) {
    detail::write_u64(os, p.name.size());
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const std::uint8_t scalar_size = sizeof(S);
    os.write(reinterpret_cast<const char*>(&scalar_size), 1);
    const Shape sh = p.var.value().shape();
    detail::write_u64(os, static_cast<std::uint64_t>(sh.n));
    detail::write_u64(os, static_cast<std::uint64_t>(sh.c));
    detail::write_u64(os, static_cast<std::uint64_t>(sh.h));
    detail::write_u64(os, static_cast<std::uint64_t>(sh.w));
    os.write(reinterpret_cast<const char*>(p.var.value().data()),
             static_cast<std::streamsize>(sizeof(S) * p.var.value().numel()));
  }
  if (!os) throw IoError("checkpoint write failed: " + path);
}

template <typename S>
struct Checkpoint {
  std::string config_text;
  std::map<std::string, Tensor<S>> params;
};

template <typename S>
Checkpoint<S> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, detail::kCkptMagic, 8) != 0)
    throw IoError("not a checkpoint file: " + path);
  Checkpoint<S> ckpt;
  const std::uint64_t cfg_len = detail::read_u64(is);
  ckpt.config_text.resize(cfg_len);
  is.read(ckpt.config_text.data(), static_cast<std::streamsize>(cfg_len));
  const std::uint64_t count = detail::read_u64(is);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t name_len = detail::read_u64(is);
    std::string name(name_len, '\0');
    is.read(name.data(), static_cast<std::streamsize>(name_len));
    std::uint8_t scalar_size = 0;
    is.read(reinterpret_cast<char*>(&scalar_size), 1);
    Shape sh;
    sh.n = static_cast<Index>(detail::read_u64(is));
    sh.c = static_cast<Index>(detail::read_u64(is));
    sh.h = static_cast<Index>(detail::read_u64(is));
    sh.w = static_cast<Index>(detail::read_u64(is));
    Tensor<S> t(sh);
    if (scalar_size == sizeof(S)) {
      is.read(reinterpret_cast<char*>(t.data()),
              static_cast<std::streamsize>(sizeof(S) * t.numel()));
    } else if (scalar_size == 4) {
      Tensor<float> raw(sh);
      is.read(reinterpret_cast<char*>(raw.data()),
              static_cast<std::streamsize>(4 * raw.numel()));
      t = raw.template cast<S>();
    } else if (scalar_size == 8) {
      Tensor<double> raw(sh);
      is.read(reinterpret_cast<char*>(raw.data()),
              static_cast<std::streamsize>(8 * raw.numel()));
      t = raw.template cast<S>();
    } else {
      throw IoError("checkpoint has unsupported scalar width");
    }
    ckpt.params.emplace(std::move(name), std::move(t));
  }
  if (!is) throw IoError("truncated checkpoint: " + path);
  return ckpt;
}

/// Copies checkpoint tensors into a live parameter list; every model
/// parameter must be present with a matching shape.
template <typename S>
void load_into(const Checkpoint<S>& ckpt, ParamList<S>& params) {
  for (auto& p : params) {
    auto it = ckpt.params.find(p.name);
    if (it == ckpt.params.end())
      throw ValidationError("checkpoint is missing parameter " + p.name);
    if (!(it->second.shape() == p.var.value().shape()))
      throw ValidationError("checkpoint parameter " + p.name + " has shape " +
                            it->second.shape().str() + ", model expects " +
                            p.var.value().shape().str());
    p.var.value() = it->second;
  }
}

}  // namespace lungseg::nn

// Copyright 2026 The Roofer Authors.
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

// Binary checkpoint layout, all integers little-endian:
//
//   "ROOFCKPT"              8 bytes
//   version                 u32 (= 1)
//   config hash             u64 (ModelConfig::hash)
//   tensor count            u32
//   per tensor:
//     name length, name     u32, bytes
//     group                 u8  (0 task, 1 kb, 2 fusion, 3 head)
//     rank, dims            u32, u64 * rank
//     values                f64 * product(dims)
//   checksum                u64 FNV-1a over every preceding byte

#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "roofer/error.hpp"
#include "roofer/roof_model.hpp"

namespace roofer {

inline constexpr std::string_view kCheckpointMagic = "ROOFCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <class UInt>
void put_le(std::string& out, UInt v) {
  for (std::size_t i = 0; i < sizeof(UInt); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <class UInt>
  UInt get() {
    need(sizeof(UInt));
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
      v |= static_cast<UInt>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(UInt);
    return v;
  }

  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw Corrupt("checkpoint ends prematurely");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const RoofWeights& w, const ModelConfig& cfg) {
  std::string out(kCheckpointMagic);
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint64_t>(out, cfg.hash());
  const auto params = w.parameters();
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    out.push_back(static_cast<char>(p.group));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.tensor.rank()));
    for (auto dim : p.tensor.shape()) detail::put_le<std::uint64_t>(out, dim);
    for (double v : p.tensor.values()) detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  detail::put_le<std::uint64_t>(out, detail::fnv1a(out));
  return out;
}

// Restores weights saved under the same configuration. Shape or name
// disagreements with cfg raise ConfigMismatch; damaged bytes raise Corrupt.
inline RoofWeights deserialize_checkpoint(std::string_view data, const ModelConfig& cfg) {
  if (data.size() < kCheckpointMagic.size() + 4 + 8 + 4 + 8) throw Corrupt("checkpoint too short");
  const std::string_view body = data.substr(0, data.size() - 8);
  detail::Reader tail(data.substr(data.size() - 8));
  if (tail.get<std::uint64_t>() != detail::fnv1a(body)) throw Corrupt("checksum mismatch");

  detail::Reader r(body);
  if (r.bytes(kCheckpointMagic.size()) != kCheckpointMagic) throw Corrupt("bad magic bytes");
  if (const auto v = r.get<std::uint32_t>(); v != kCheckpointVersion) {
    throw Corrupt("unsupported checkpoint version " + std::to_string(v));
  }
  if (r.get<std::uint64_t>() != cfg.hash()) {
    throw ConfigMismatch("checkpoint was written for a different model configuration");
  }

  RoofWeights w = init_roof(cfg, 0);
  std::map<std::string, Param> by_name;
  for (auto& p : w.parameters()) by_name.emplace(p.name, p);

  const auto count = r.get<std::uint32_t>();
  if (count != by_name.size()) throw ConfigMismatch("tensor count differs from configuration");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name(r.bytes(r.get<std::uint32_t>()));
    const auto group = static_cast<std::uint8_t>(r.bytes(1)[0]);
    const auto rank = r.get<std::uint32_t>();
    ad::Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));

    auto it = by_name.find(name);
    if (it == by_name.end()) throw ConfigMismatch("unexpected tensor '" + name + "'");
    Param& p = it->second;
    if (p.tensor.shape() != shape || static_cast<std::uint8_t>(p.group) != group) {
      throw ConfigMismatch("tensor '" + name + "' has shape " + ad::to_string(shape) + ", expected " +
                           ad::to_string(p.tensor.shape()));
    }
    auto& values = p.tensor.mutable_values();
    for (auto& v : values) v = std::bit_cast<double>(r.get<std::uint64_t>());
  }
  if (!r.done()) throw Corrupt("trailing bytes after tensors");
  return w;
}

inline void save_checkpoint(const RoofWeights& w, const ModelConfig& cfg, const std::string& path) {
  const std::string bytes = serialize_checkpoint(w, cfg);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

inline RoofWeights load_checkpoint(const std::string& path, const ModelConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes, cfg);
}

}  // namespace roofer

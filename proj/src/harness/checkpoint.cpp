/* Copyright 2026 The utnas Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "utnas/harness/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <limits>

#include "utnas/common/error.hpp"
#include "utnas/model/architectures.hpp"
#include "utnas/nas/genome.hpp"
#include "utnas/harness/io.hpp"

namespace utnas::harness {

namespace {

static_assert(std::endian::native == std::endian::little, "UTCK codec assumes a little-endian host");

template <typename U>
void put(std::vector<std::uint8_t>& out, U value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(U));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return value;
  }

  std::string text(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void floats(std::span<float> out, const char* what) {
    need(out.size() * sizeof(float), what);
    std::memcpy(out.data(), bytes_.data() + pos_, out.size() * sizeof(float));
    pos_ += out.size() * sizeof(float);
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    require(bytes_.size() - pos_ >= n, ErrorCode::truncated, std::string("UTCK: truncated ") + what);
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Checkpoint capture(model::Model& m) {
  Checkpoint c;
  c.descriptor = m.descriptor();
  for (const auto& p : m.parameters()) {
    const auto v = p.tensor->values();
    c.blobs.push_back({p.name, p.tensor->shape(), std::vector<float>(v.begin(), v.end())});
  }
  return c;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  const auto u32max = std::numeric_limits<std::uint32_t>::max();
  require(c.descriptor.size() <= u32max && c.blobs.size() <= u32max, ErrorCode::dimension_overflow,
          "UTCK: descriptor or blob count too large");
  std::vector<std::uint8_t> out = {'U', 'T', 'C', 'K'};
  put<std::uint8_t>(out, kCheckpointVersion);
  out.insert(out.end(), 3, 0);
  put<std::uint64_t>(out, fnv1a64(c.descriptor));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.descriptor.size()));
  out.insert(out.end(), c.descriptor.begin(), c.descriptor.end());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.blobs.size()));
  for (const auto& b : c.blobs) {
    require(b.name.size() <= std::numeric_limits<std::uint16_t>::max() && b.shape.size() <= 255,
            ErrorCode::dimension_overflow, "UTCK: blob '" + b.name + "' name or rank too large");
    require(num::numel(b.shape) == b.values.size(), ErrorCode::shape_mismatch,
            "UTCK: blob '" + b.name + "' size disagrees with its shape");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(b.name.size()));
    out.insert(out.end(), b.name.begin(), b.name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(b.shape.size()));
    for (auto e : b.shape) {
      require(e <= u32max, ErrorCode::dimension_overflow, "UTCK: extent too large");
      put<std::uint32_t>(out, static_cast<std::uint32_t>(e));
    }
    for (float v : b.values) put<float>(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 4 && std::memcmp(bytes.data(), "UTCK", 4) == 0, ErrorCode::bad_magic,
          "UTCK: bad magic");
  Reader r(bytes.subspan(4));
  const auto version = r.get<std::uint8_t>("header");
  require(version == kCheckpointVersion, ErrorCode::unsupported_version,
          "UTCK: unsupported version " + std::to_string(version));
  r.text(3, "header");
  const auto hash = r.get<std::uint64_t>("header");
  Checkpoint c;
  c.descriptor = r.text(r.get<std::uint32_t>("header"), "descriptor");
  require(fnv1a64(c.descriptor) == hash, ErrorCode::parse_error, "UTCK: descriptor hash mismatch");
  const auto count = r.get<std::uint32_t>("blob count");
  for (std::uint32_t i = 0; i < count; ++i) {
    Blob b;
    b.name = r.text(r.get<std::uint16_t>("blob name"), "blob name");
    const auto rank = r.get<std::uint8_t>("blob rank");
    std::uint64_t n = 1;
    for (std::uint8_t a = 0; a < rank; ++a) {
      b.shape.push_back(r.get<std::uint32_t>("blob extents"));
      n *= b.shape.back();
      require(n <= bytes.size(), ErrorCode::truncated, "UTCK: blob '" + b.name + "' exceeds the file");
    }
    b.values.resize(static_cast<std::size_t>(n));
    r.floats(b.values, "blob payload");
    c.blobs.push_back(std::move(b));
  }
  require(r.done(), ErrorCode::parse_error, "UTCK: trailing bytes");
  return c;
}

void save_checkpoint(model::Model& m, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(capture(m)));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

void restore(model::Model& m, const Checkpoint& c) {
  require(c.descriptor == m.descriptor(), ErrorCode::config_mismatch,
          "checkpoint was written for '" + c.descriptor + "', model is '" + m.descriptor() + "'");
  auto params = m.parameters();
  require(params.size() == c.blobs.size(), ErrorCode::config_mismatch,
          "checkpoint has " + std::to_string(c.blobs.size()) + " blobs, model has " +
              std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& b = c.blobs[i];
    require(b.name == params[i].name && b.shape == params[i].tensor->shape(), ErrorCode::config_mismatch,
            "checkpoint blob '" + b.name + "' does not match parameter '" + params[i].name + "'");
    std::copy(b.values.begin(), b.values.end(), params[i].tensor->mutable_values().begin());
  }
}

model::Model model_from_descriptor(std::string_view descriptor) {
  if (descriptor.starts_with("arch ")) return model::build(model::parse_arch(descriptor));
  if (descriptor.starts_with("nas ")) return nas::instantiate_descriptor(descriptor);
  fail(ErrorCode::parse_error, "unknown model descriptor '" + std::string(descriptor.substr(0, 32)) + "'");
}

}  // namespace utnas::harness

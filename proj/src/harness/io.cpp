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
#include "utnas/harness/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "utnas/common/error.hpp"

namespace utnas::harness {

namespace {

static_assert(std::endian::native == std::endian::little, "UTV1 codec assumes a little-endian host");

template <typename U>
void put(std::vector<std::uint8_t>& out, U value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(U));
}

template <typename U>
U get(std::span<const std::uint8_t> bytes, std::size_t offset) {
  U value;
  std::memcpy(&value, bytes.data() + offset, sizeof(U));
  return value;
}

signal::Label label_from_byte(std::uint8_t b) {
  switch (b) {
    case 0: return signal::Label::defect_free;
    case 1: return signal::Label::defect;
    case 255: return signal::Label::unlabeled;
    default: fail(ErrorCode::parse_error, "UTV1: invalid label byte " + std::to_string(b));
  }
}

}  // namespace

std::vector<std::uint8_t> encode_volume(const signal::Volume& v) {
  const auto limit = std::numeric_limits<std::uint32_t>::max();
  require(v.n_scan() <= limit && v.n_array() <= limit && v.n_time() <= limit,
          ErrorCode::dimension_overflow, "UTV1: extent does not fit in u32");
  std::vector<std::uint8_t> out;
  out.reserve(kVolumeHeaderBytes + 4 * v.data().size());
  out.insert(out.end(), {'U', 'T', 'V', '1'});
  put<std::uint8_t>(out, kVolumeVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(v.label()));
  put<std::uint16_t>(out, 0);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(v.n_scan()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(v.n_array()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(v.n_time()));
  for (double x : v.data()) put<float>(out, static_cast<float>(x));
  return out;
}

signal::Volume decode_volume(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 4 && std::memcmp(bytes.data(), "UTV1", 4) == 0, ErrorCode::bad_magic,
          "UTV1: bad magic");
  require(bytes.size() >= kVolumeHeaderBytes, ErrorCode::truncated, "UTV1: truncated header");
  const auto version = get<std::uint8_t>(bytes, 4);
  require(version == kVolumeVersion, ErrorCode::unsupported_version,
          "UTV1: unsupported version " + std::to_string(version));
  const auto label = label_from_byte(get<std::uint8_t>(bytes, 5));
  const std::uint64_t ns = get<std::uint32_t>(bytes, 8);
  const std::uint64_t na = get<std::uint32_t>(bytes, 12);
  const std::uint64_t nt = get<std::uint32_t>(bytes, 16);
  require(ns > 0 && na > 0 && nt > 0, ErrorCode::invalid_argument, "UTV1: zero extent");
  // Each extent is < 2^32, so ns*na fits; guard the second product.
  const std::uint64_t plane = ns * na;
  require(nt <= (std::numeric_limits<std::uint64_t>::max() / 4) / plane,
          ErrorCode::dimension_overflow, "UTV1: voxel count overflows");
  const std::uint64_t voxels = plane * nt;
  require(voxels * 4 <= bytes.size() - kVolumeHeaderBytes, ErrorCode::truncated,
          "UTV1: header claims " + std::to_string(voxels) + " voxels but payload holds " +
              std::to_string((bytes.size() - kVolumeHeaderBytes) / 4));
  require(voxels * 4 == bytes.size() - kVolumeHeaderBytes, ErrorCode::parse_error,
          "UTV1: trailing bytes after payload");
  signal::Volume v(ns, na, nt, label);
  auto data = v.data();
  for (std::size_t i = 0; i < voxels; ++i)
    data[i] = static_cast<double>(get<float>(bytes, kVolumeHeaderBytes + 4 * i));
  return v;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io_error, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::io_error, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorCode::io_error, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_volume(const signal::Volume& v, const std::filesystem::path& path) {
  write_file(path, encode_volume(v));
}

signal::Volume read_volume(const std::filesystem::path& path) { return decode_volume(read_file(path)); }

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "validation") return Split::validation;
  if (text == "test") return Split::test;
  fail(ErrorCode::parse_error, "unknown split '" + std::string(text) + "'");
}

std::string format_manifest(const std::vector<ManifestEntry>& entries) {
  std::ostringstream os;
  for (const auto& e : entries)
    os << e.path << '\t' << signal::to_string(e.label) << '\t' << to_string(e.split) << '\n';
  return os.str();
}

std::vector<ManifestEntry> parse_manifest(std::string_view text) {
  std::vector<ManifestEntry> entries;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    auto line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    require(t2 != std::string_view::npos && line.find('\t', t2 + 1) == std::string_view::npos,
            ErrorCode::parse_error,
            "manifest line " + std::to_string(line_no) + ": expected 3 tab-separated fields");
    try {
      entries.push_back({std::string(line.substr(0, t1)),
                         signal::parse_label(line.substr(t1 + 1, t2 - t1 - 1)),
                         parse_split(line.substr(t2 + 1))});
    } catch (const Error& e) {
      fail(ErrorCode::parse_error, "manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    require(!entries.back().path.empty(), ErrorCode::parse_error,
            "manifest line " + std::to_string(line_no) + ": empty path");
  }
  return entries;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dir) {
  return parse_manifest(read_text(dir / kManifestName));
}

void write_manifest(const std::filesystem::path& dir, const std::vector<ManifestEntry>& entries) {
  write_text(dir / kManifestName, format_manifest(entries));
}

}  // namespace utnas::harness

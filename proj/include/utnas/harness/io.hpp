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
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "utnas/signal/volume.hpp"

namespace utnas::harness {

// UTV1 volume file, little-endian:
//   "UTV1" | version u8 = 1 | label u8 (0, 1, 255) | reserved u16 = 0 |
//   nScan u32 | nArray u32 | nTime u32 | nScan*nArray*nTime binary32
// with time fastest-varying, then array, then scan.
inline constexpr std::uint8_t kVolumeVersion = 1;
inline constexpr std::size_t kVolumeHeaderBytes = 20;

// Amplitudes are rounded to binary32.
std::vector<std::uint8_t> encode_volume(const signal::Volume& v);
signal::Volume decode_volume(std::span<const std::uint8_t> bytes);

void write_volume(const signal::Volume& v, const std::filesystem::path& path);
signal::Volume read_volume(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
// Writes through a temporary sibling and renames it into place.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

enum class Split { train, validation, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory
  signal::Label label = signal::Label::unlabeled;
  Split split = Split::train;
};

inline constexpr const char* kManifestName = "manifest.tsv";

// One record per line: <relative-path>\t<label>\t<split>
std::string format_manifest(const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> parse_manifest(std::string_view text);

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dir);
void write_manifest(const std::filesystem::path& dir, const std::vector<ManifestEntry>& entries);

}  // namespace utnas::harness

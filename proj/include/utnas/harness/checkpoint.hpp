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

#include "utnas/model/model.hpp"

namespace utnas::harness {

// UTCK checkpoint, little-endian:
//   "UTCK" | version u8 = 1 | reserved 3 bytes = 0 |
//   descriptor hash u64 (FNV-1a) | descriptor length u32 | descriptor UTF-8 |
//   blob count u32 | blobs
// Each blob: name length u16 | name UTF-8 | rank u8 | extents u32 each |
// binary32 payload. Blobs cover every parameter and buffer of the model.
inline constexpr std::uint8_t kCheckpointVersion = 1;

std::uint64_t fnv1a64(std::string_view text);

struct Blob {
  std::string name;
  model::Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::string descriptor;
  std::vector<Blob> blobs;
};

Checkpoint capture(model::Model& m);
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(model::Model& m, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies blob values into a model built from the same descriptor. Names and
// shapes must match one to one.
void restore(model::Model& m, const Checkpoint& c);

// Rebuilds an uninitialized model from a descriptor ("arch ..." or "nas ...").
model::Model model_from_descriptor(std::string_view descriptor);

}  // namespace utnas::harness

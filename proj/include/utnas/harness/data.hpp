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

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "utnas/harness/io.hpp"
#include "utnas/model/layers.hpp"
#include "utnas/signal/volume.hpp"

namespace utnas::harness {

// Records every split load. Training and search take typed splits, so a test
// load shows up here only when evaluation asked for it.
class AccessLog {
 public:
  void record(Split split, std::size_t items);
  std::size_t reads(Split split) const { return reads_[static_cast<std::size_t>(split)]; }
  std::string format() const;  // one "<split>\t<items>" line per event

 private:
  std::array<std::size_t, 3> reads_{};
  std::vector<std::pair<Split, std::size_t>> events_;
};

// Volumes of one split. The split is part of the type.
template <Split S>
class SplitSet {
 public:
  SplitSet() = default;
  explicit SplitSet(std::vector<signal::Volume> volumes);

  std::size_t size() const { return volumes_.size(); }
  bool empty() const { return volumes_.empty(); }
  const signal::Volume& operator[](std::size_t i) const { return volumes_[i]; }
  const std::vector<signal::Volume>& volumes() const { return volumes_; }
  float label(std::size_t i) const;

  // [1, n_scan, n_array, n_time], shared by every item.
  const model::Shape& item_shape() const { return item_shape_; }

 private:
  std::vector<signal::Volume> volumes_;
  model::Shape item_shape_;
};

using TrainSet = SplitSet<Split::train>;
using ValidationSet = SplitSet<Split::validation>;
using TestSet = SplitSet<Split::test>;

// A dataset directory with a manifest.
class DatasetDir {
 public:
  explicit DatasetDir(std::filesystem::path dir);

  const std::filesystem::path& path() const { return dir_; }
  const std::vector<ManifestEntry>& entries() const { return entries_; }
  std::size_t count(Split split) const;

  template <Split S>
  SplitSet<S> load(AccessLog& log) const;

 private:
  std::filesystem::path dir_;
  std::vector<ManifestEntry> entries_;
};

// Stacks volumes into a [B, 1, S, A, T] tensor.
model::Tensor to_batch(std::span<const signal::Volume* const> volumes);
model::Tensor to_batch(const std::vector<signal::Volume>& volumes);

}  // namespace utnas::harness

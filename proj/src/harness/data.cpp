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
#include "utnas/harness/data.hpp"

#include "utnas/common/error.hpp"

namespace utnas::harness {

void AccessLog::record(Split split, std::size_t items) {
  ++reads_[static_cast<std::size_t>(split)];
  events_.emplace_back(split, items);
}

std::string AccessLog::format() const {
  std::string out;
  for (const auto& [split, items] : events_)
    out += std::string(to_string(split)) + "\t" + std::to_string(items) + "\n";
  return out;
}

template <Split S>
SplitSet<S>::SplitSet(std::vector<signal::Volume> volumes) : volumes_(std::move(volumes)) {
  if (volumes_.empty()) return;
  const auto& v0 = volumes_.front();
  item_shape_ = {1, v0.n_scan(), v0.n_array(), v0.n_time()};
  for (const auto& v : volumes_) {
    require(v.n_scan() == v0.n_scan() && v.n_array() == v0.n_array() && v.n_time() == v0.n_time(),
            ErrorCode::shape_mismatch, std::string(to_string(S)) + " split: volumes differ in shape");
    require(v.label() != signal::Label::unlabeled, ErrorCode::invalid_argument,
            std::string(to_string(S)) + " split: unlabeled volume");
  }
}

template <Split S>
float SplitSet<S>::label(std::size_t i) const {
  return volumes_[i].label() == signal::Label::defect ? 1.0f : 0.0f;
}

DatasetDir::DatasetDir(std::filesystem::path dir) : dir_(std::move(dir)), entries_(read_manifest(dir_)) {}

std::size_t DatasetDir::count(Split split) const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.split == split;
  return n;
}

template <Split S>
SplitSet<S> DatasetDir::load(AccessLog& log) const {
  std::vector<signal::Volume> volumes;
  for (const auto& e : entries_) {
    if (e.split != S) continue;
    auto v = read_volume(dir_ / e.path);
    require(v.label() == e.label, ErrorCode::parse_error,
            e.path + ": label in file disagrees with the manifest");
    volumes.push_back(std::move(v));
  }
  log.record(S, volumes.size());
  return SplitSet<S>(std::move(volumes));
}

model::Tensor to_batch(std::span<const signal::Volume* const> volumes) {
  require(!volumes.empty(), ErrorCode::invalid_argument, "batch: no volumes");
  const auto& v0 = *volumes.front();
  const std::size_t item = v0.data().size();
  std::vector<float> data(volumes.size() * item);
  for (std::size_t b = 0; b < volumes.size(); ++b) {
    const auto& v = *volumes[b];
    require(v.n_scan() == v0.n_scan() && v.n_array() == v0.n_array() && v.n_time() == v0.n_time(),
            ErrorCode::shape_mismatch, "batch: volumes differ in shape");
    for (std::size_t i = 0; i < item; ++i) data[b * item + i] = static_cast<float>(v.data()[i]);
  }
  return model::Tensor::from({volumes.size(), 1, v0.n_scan(), v0.n_array(), v0.n_time()}, std::move(data));
}

model::Tensor to_batch(const std::vector<signal::Volume>& volumes) {
  std::vector<const signal::Volume*> ptrs;
  for (const auto& v : volumes) ptrs.push_back(&v);
  return to_batch(std::span<const signal::Volume* const>(ptrs));
}

template class SplitSet<Split::train>;
template class SplitSet<Split::validation>;
template class SplitSet<Split::test>;
template TrainSet DatasetDir::load<Split::train>(AccessLog&) const;
template ValidationSet DatasetDir::load<Split::validation>(AccessLog&) const;
template TestSet DatasetDir::load<Split::test>(AccessLog&) const;

}  // namespace utnas::harness

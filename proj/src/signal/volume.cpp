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
#include "utnas/signal/volume.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "utnas/common/error.hpp"

namespace utnas::signal {

std::string_view to_string(Label label) {
  switch (label) {
    case Label::defect_free: return "defect_free";
    case Label::defect: return "defect";
    case Label::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

Label parse_label(std::string_view text) {
  if (text == "defect_free") return Label::defect_free;
  if (text == "defect") return Label::defect;
  if (text == "unlabeled") return Label::unlabeled;
  fail(ErrorCode::parse_error, "unknown label '" + std::string(text) + "'");
}

Volume::Volume(std::size_t n_scan, std::size_t n_array, std::size_t n_time, Label label)
    : n_scan_(n_scan), n_array_(n_array), n_time_(n_time), label_(label) {
  require(n_scan > 0 && n_array > 0 && n_time > 0, ErrorCode::invalid_argument,
          "volume: extents must be positive");
  const std::size_t limit = std::numeric_limits<std::size_t>::max() / sizeof(double);
  require(n_scan <= limit / n_array && n_scan * n_array <= limit / n_time,
          ErrorCode::dimension_overflow, "volume: extents overflow");
  data_.assign(n_scan * n_array * n_time, 0.0);
}

std::span<double> Volume::ascan(std::size_t scan, std::size_t array) {
  return ascan(scan * n_array_ + array);
}

std::span<const double> Volume::ascan(std::size_t scan, std::size_t array) const {
  return ascan(scan * n_array_ + array);
}

std::span<double> Volume::ascan(std::size_t index) {
  return std::span<double>(data_).subspan(index * n_time_, n_time_);
}

std::span<const double> Volume::ascan(std::size_t index) const {
  return std::span<const double>(data_).subspan(index * n_time_, n_time_);
}

void Volume::set_front_wall_index(std::vector<std::size_t> index) {
  require(index.empty() || index.size() == n_ascans(), ErrorCode::shape_mismatch,
          "volume: front-wall map must have one entry per A-scan");
  front_wall_ = std::move(index);
}

bool Volume::aligned() const {
  if (data_.empty()) return false;
  for (std::size_t i = 0; i < n_ascans(); ++i) {
    const auto a = ascan(i);
    if (*std::max_element(a.begin(), a.end()) > a[0]) return false;
  }
  return true;
}

double Volume::max_value() const {
  return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
}

}  // namespace utnas::signal

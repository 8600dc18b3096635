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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace utnas::signal {

enum class Label : std::uint8_t { defect_free = 0, defect = 1, unlabeled = 255 };

std::string_view to_string(Label label);
Label parse_label(std::string_view text);

struct AScan {
  std::vector<double> samples;
  double sample_rate = 0.0;  // Hz
};

// A UT volume with axes [scan, array, time]; time is fastest-varying.
class Volume {
 public:
  Volume() = default;
  Volume(std::size_t n_scan, std::size_t n_array, std::size_t n_time,
         Label label = Label::unlabeled);

  std::size_t n_scan() const { return n_scan_; }
  std::size_t n_array() const { return n_array_; }
  std::size_t n_time() const { return n_time_; }
  std::size_t n_ascans() const { return n_scan_ * n_array_; }

  Label label() const { return label_; }
  void set_label(Label label) { label_ = label; }

  double sample_rate() const { return sample_rate_; }
  void set_sample_rate(double hz) { sample_rate_ = hz; }

  std::span<double> ascan(std::size_t scan, std::size_t array);
  std::span<const double> ascan(std::size_t scan, std::size_t array) const;
  std::span<double> ascan(std::size_t index);
  std::span<const double> ascan(std::size_t index) const;

  double& at(std::size_t scan, std::size_t array, std::size_t t) {
    return data_[(scan * n_array_ + array) * n_time_ + t];
  }
  double at(std::size_t scan, std::size_t array, std::size_t t) const {
    return data_[(scan * n_array_ + array) * n_time_ + t];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  // Per-A-scan front-wall peak index; empty until alignment has run.
  const std::vector<std::size_t>& front_wall_index() const { return front_wall_; }
  void set_front_wall_index(std::vector<std::size_t> index);

  // True when every A-scan attains its maximum at index 0.
  bool aligned() const;

  double max_value() const;

 private:
  std::size_t n_scan_ = 0, n_array_ = 0, n_time_ = 0;
  Label label_ = Label::unlabeled;
  double sample_rate_ = 0.0;
  std::vector<double> data_;
  std::vector<std::size_t> front_wall_;
};

}  // namespace utnas::signal

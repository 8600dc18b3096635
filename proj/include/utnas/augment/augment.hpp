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
#include <vector>

#include "utnas/common/rng.hpp"
#include "utnas/signal/volume.hpp"

namespace utnas::augment {

struct AugmentConfig {
  double scale_lo = 0.8;
  double scale_hi = 1.2;
  std::size_t max_dilation = 15;  // samples
  bool enabled = true;
  std::size_t padded_length = 1024;

  void validate() const;
};

// Multiplies every sample after index 0 by `factor`.
void scale_ascan(std::span<double> samples, double factor);

// Linearly resamples the segment [0, n-1] onto [0, n-1+delta] and pads or
// truncates the result to `length`. Index 0 maps to itself.
std::vector<double> dilate_ascan(std::span<const double> samples, std::int64_t delta,
                                 std::size_t length);

// One uniform factor per A-scan, applied past the front-wall peak.
signal::Volume scale_augment(const signal::Volume& v, const AugmentConfig& cfg, Rng& rng);

// One integer stretch in [-max_dilation, max_dilation] per A-scan. Output time
// extent is cfg.padded_length.
signal::Volume dilate_augment(const signal::Volume& v, const AugmentConfig& cfg, Rng& rng);

// Scale then dilate every volume, each A-scan on its own derived stream.
// Identity when the config is disabled.
std::vector<signal::Volume> augment_batch(const std::vector<signal::Volume>& batch,
                                          const AugmentConfig& cfg, Rng& rng);

}  // namespace utnas::augment

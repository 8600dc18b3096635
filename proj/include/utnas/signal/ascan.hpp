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
#include <span>
#include <vector>

#include "utnas/signal/volume.hpp"

namespace utnas::signal {

inline constexpr double kFrontWallGuard = 0.1;

// |analytic signal| of the zero-centered trace. Requires at least 4 samples.
std::vector<double> envelope(std::span<const double> samples);
AScan envelope(const AScan& a);

// Envelope of every A-scan in place.
void envelope_volume(Volume& v);

// Divides by the volume-wide maximum. Rejects volumes whose maximum is not
// positive.
void normalize_volume(Volume& v);

struct Alignment {
  std::vector<std::size_t> shifts;   // per A-scan, left shift applied
  std::vector<std::size_t> flagged;  // A-scans with no peak above the guard
};

// Shifts each A-scan left so its global maximum lands at index 0. A-scans
// whose maximum is below guard * volume max are left in place and flagged.
Alignment align_front_wall(Volume& v, double guard = kFrontWallGuard);

// Zero-pads to exactly `length`; longer input is rejected.
std::vector<double> pad_to_length(std::span<const double> samples, std::size_t length);
void pad_volume(Volume& v, std::size_t length);

// envelope -> normalize -> align -> pad.
Alignment preprocess(Volume& v, std::size_t padded_length, double guard = kFrontWallGuard);

}  // namespace utnas::signal

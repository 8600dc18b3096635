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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "utnas/common/rng.hpp"
#include "utnas/signal/volume.hpp"

namespace utnas::phantom {

struct MaterialSpec {
  double thickness_mm = 8.6;
  double sound_speed = 3000.0;  // m/s
  double density = 1440.0;      // kg/m^3, informational
};

struct ProbeSpec {
  std::size_t elements = 64;  // array extent; scan extent is the same
  double pitch_mm = 0.8;
  double scan_step_mm = 0.8;
  double center_frequency_mhz = 5.0;
  double fractional_bandwidth = 0.6;  // -6 dB, relative to center frequency
  double sample_rate_hz = 100e6;
  std::size_t record_length = 800;
};

// Echo amplitudes and acquisition offsets of the pulse-echo model.
struct EchoModel {
  double front_wall = 1.0;
  double back_wall = 0.5;
  double defect = 0.6;
  double shadow = 0.1;  // back-wall factor under the defect footprint
  std::size_t offset_min = 80;  // front-wall arrival, samples
  std::size_t offset_max = 100;
  double backscatter = 0.04;  // RF grain-noise level of the hold-out reference
};

struct DefectSpec {
  double diameter_mm = 3.0;
  double depth_mm = 1.5;
  double center_scan_mm = 0.0;
  double center_array_mm = 0.0;
};

// Sample index of an echo `depth_mm` below the front wall.
std::size_t echo_index(double depth_mm, const MaterialSpec& m, const ProbeSpec& p);

// Element (scan, array) pairs whose centers lie within the defect radius.
// Element i sits at (i + 0.5) * pitch.
std::vector<std::size_t> footprint(const DefectSpec& d, const ProbeSpec& p);

// Uniform defect center keeping the footprint inside the aperture.
DefectSpec place_defect(double diameter_mm, double depth_mm, const ProbeSpec& p, Rng& rng);

void validate(const MaterialSpec& m, const ProbeSpec& p, const EchoModel& e);
void validate(const DefectSpec& d, const MaterialSpec& m, const ProbeSpec& p);

// Raw RF volume: Gaussian-windowed tone bursts for the front wall, the back
// wall (shadowed under a defect) and the defect. Per-element front-wall
// offsets are drawn from [offset_min, offset_max].
signal::Volume simulate_volume(const MaterialSpec& m, const ProbeSpec& p, const EchoModel& e,
                               const std::optional<DefectSpec>& d, Rng& rng);

// Raw RF hold-out reference: front wall plus band-limited grain backscatter,
// no back wall. Stands in for the experimental noise sample.
signal::Volume simulate_reference(const MaterialSpec& m, const ProbeSpec& p, const EchoModel& e,
                                  Rng& rng);

struct NoiseModel {
  std::vector<double> mean;    // per time index
  std::vector<double> stddev;  // per time index
  std::size_t start_index = 0;  // first index past the front-wall echo
  std::string source;
};

inline constexpr double kFrontWallTail = 0.1;

// Per-index mean and population standard deviation across all A-scans of an
// aligned, normalized reference, extended with zeros to `length`.
NoiseModel fit_noise_model(const signal::Volume& reference, std::size_t length,
                           std::string source = "");

// Adds mean + stddev * N(0,1) to every sample from start_index on, clamps at
// zero and renormalizes to a maximum of 1.
void apply_noise(signal::Volume& v, const NoiseModel& model, Rng& rng);

// Rounds every amplitude to the nearest binary32 value.
void quantize(signal::Volume& v);

}  // namespace utnas::phantom

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
#include "utnas/phantom/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "utnas/common/error.hpp"
#include "utnas/signal/ascan.hpp"

namespace utnas::phantom {

namespace {

constexpr double kMinDiameter = 3.0, kMaxDiameter = 15.0;
constexpr double kMinDepth = 1.5, kMaxDepth = 7.0;
constexpr double kPulseHalfWidth = 6.0;  // in pulse standard deviations

// Standard deviation (in samples) of the Gaussian pulse envelope whose
// amplitude spectrum falls to one half at fc * (1 +- bw / 2).
double pulse_sigma_samples(const ProbeSpec& p) {
  const double half_band_hz = 0.5 * p.fractional_bandwidth * p.center_frequency_mhz * 1e6;
  const double sigma_s = std::sqrt(2.0 * std::numbers::ln2) / (2.0 * std::numbers::pi * half_band_hz);
  return sigma_s * p.sample_rate_hz;
}

void add_burst(std::span<double> a, double center, double amplitude, double sigma,
               double cycles_per_sample) {
  const double reach = kPulseHalfWidth * sigma;
  const auto lo = static_cast<std::ptrdiff_t>(std::floor(center - reach));
  const auto hi = static_cast<std::ptrdiff_t>(std::ceil(center + reach));
  for (std::ptrdiff_t t = std::max<std::ptrdiff_t>(lo, 0);
       t <= hi && t < static_cast<std::ptrdiff_t>(a.size()); ++t) {
    const double dt = static_cast<double>(t) - center;
    a[static_cast<std::size_t>(t)] += amplitude * std::exp(-0.5 * dt * dt / (sigma * sigma)) *
                                      std::cos(2.0 * std::numbers::pi * cycles_per_sample * dt);
  }
}

std::vector<std::size_t> draw_offsets(const ProbeSpec& p, const EchoModel& e, Rng& rng) {
  std::vector<std::size_t> offsets(p.elements * p.elements);
  for (auto& o : offsets)
    o = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(e.offset_min),
                                                 static_cast<std::int64_t>(e.offset_max)));
  return offsets;
}

}  // namespace

std::size_t echo_index(double depth_mm, const MaterialSpec& m, const ProbeSpec& p) {
  return static_cast<std::size_t>(
      std::llround(2.0 * depth_mm * 1e-3 / m.sound_speed * p.sample_rate_hz));
}

std::vector<std::size_t> footprint(const DefectSpec& d, const ProbeSpec& p) {
  std::vector<std::size_t> cells;
  const double r = 0.5 * d.diameter_mm;
  for (std::size_t s = 0; s < p.elements; ++s)
    for (std::size_t a = 0; a < p.elements; ++a) {
      const double ds = (static_cast<double>(s) + 0.5) * p.scan_step_mm - d.center_scan_mm;
      const double da = (static_cast<double>(a) + 0.5) * p.pitch_mm - d.center_array_mm;
      if (ds * ds + da * da <= r * r) cells.push_back(s * p.elements + a);
    }
  return cells;
}

DefectSpec place_defect(double diameter_mm, double depth_mm, const ProbeSpec& p, Rng& rng) {
  const double r = 0.5 * diameter_mm;
  const double scan_extent = static_cast<double>(p.elements) * p.scan_step_mm;
  const double array_extent = static_cast<double>(p.elements) * p.pitch_mm;
  require(2.0 * r <= scan_extent && 2.0 * r <= array_extent, ErrorCode::invalid_argument,
          "defect: diameter " + std::to_string(diameter_mm) + " mm exceeds the aperture");
  DefectSpec d;
  d.diameter_mm = diameter_mm;
  d.depth_mm = depth_mm;
  d.center_scan_mm = rng.uniform(r, scan_extent - r);
  d.center_array_mm = rng.uniform(r, array_extent - r);
  return d;
}

void validate(const MaterialSpec& m, const ProbeSpec& p, const EchoModel& e) {
  require(m.thickness_mm > 0 && m.sound_speed > 0, ErrorCode::invalid_argument,
          "material: thickness and sound speed must be positive");
  require(p.elements > 0 && p.pitch_mm > 0 && p.sample_rate_hz > 0 && p.center_frequency_mhz > 0 &&
              p.fractional_bandwidth > 0,
          ErrorCode::invalid_argument, "probe: elements, pitch, rates and bandwidth must be positive");
  require(p.pitch_mm == p.scan_step_mm, ErrorCode::invalid_argument,
          "probe: pitch must equal scan step for square voxels");
  require(p.center_frequency_mhz * 1e6 * 2.0 < p.sample_rate_hz, ErrorCode::invalid_argument,
          "probe: sample rate must exceed twice the center frequency");
  require(e.offset_min <= e.offset_max, ErrorCode::invalid_argument,
          "echo model: offset_min exceeds offset_max");
  const double tail = kPulseHalfWidth * pulse_sigma_samples(p);
  require(static_cast<double>(e.offset_min) >= 0.5 * tail, ErrorCode::invalid_argument,
          "echo model: front-wall offset leaves no room for the pulse onset");
  const double back = static_cast<double>(echo_index(m.thickness_mm, m, p) + e.offset_max) + tail;
  require(back < static_cast<double>(p.record_length), ErrorCode::invalid_argument,
          "geometry: back-wall echo at sample " + std::to_string(back) +
              " does not fit a record of " + std::to_string(p.record_length) + " samples");
}

void validate(const DefectSpec& d, const MaterialSpec& m, const ProbeSpec& p) {
  require(d.diameter_mm >= kMinDiameter && d.diameter_mm <= kMaxDiameter,
          ErrorCode::invalid_argument,
          "defect: diameter " + std::to_string(d.diameter_mm) + " mm outside [3, 15]");
  require(d.depth_mm >= kMinDepth && d.depth_mm <= kMaxDepth && d.depth_mm < m.thickness_mm,
          ErrorCode::invalid_argument,
          "defect: depth " + std::to_string(d.depth_mm) + " mm outside [1.5, 7] or below the back wall");
  const double r = 0.5 * d.diameter_mm;
  const double scan_extent = static_cast<double>(p.elements) * p.scan_step_mm;
  const double array_extent = static_cast<double>(p.elements) * p.pitch_mm;
  require(d.center_scan_mm - r >= 0 && d.center_scan_mm + r <= scan_extent &&
              d.center_array_mm - r >= 0 && d.center_array_mm + r <= array_extent,
          ErrorCode::invalid_argument, "defect: footprint leaves the scanned aperture");
}

signal::Volume simulate_volume(const MaterialSpec& m, const ProbeSpec& p, const EchoModel& e,
                               const std::optional<DefectSpec>& d, Rng& rng) {
  validate(m, p, e);
  std::vector<bool> inside(p.elements * p.elements, false);
  std::size_t defect_at = 0;
  if (d) {
    validate(*d, m, p);
    for (auto c : footprint(*d, p)) inside[c] = true;
    defect_at = echo_index(d->depth_mm, m, p);
  }
  const std::size_t back_at = echo_index(m.thickness_mm, m, p);
  const double sigma = pulse_sigma_samples(p);
  const double cps = p.center_frequency_mhz * 1e6 / p.sample_rate_hz;
  const auto offsets = draw_offsets(p, e, rng);

  signal::Volume v(p.elements, p.elements, p.record_length,
                   d ? signal::Label::defect : signal::Label::defect_free);
  v.set_sample_rate(p.sample_rate_hz);
  for (std::size_t i = 0; i < v.n_ascans(); ++i) {
    auto a = v.ascan(i);
    const auto t0 = static_cast<double>(offsets[i]);
    add_burst(a, t0, e.front_wall, sigma, cps);
    add_burst(a, t0 + static_cast<double>(back_at), inside[i] ? e.back_wall * e.shadow : e.back_wall,
              sigma, cps);
    if (inside[i]) add_burst(a, t0 + static_cast<double>(defect_at), e.defect, sigma, cps);
  }
  return v;
}

signal::Volume simulate_reference(const MaterialSpec& m, const ProbeSpec& p, const EchoModel& e,
                                  Rng& rng) {
  validate(m, p, e);
  const double sigma = pulse_sigma_samples(p);
  const double cps = p.center_frequency_mhz * 1e6 / p.sample_rate_hz;
  // Unit-energy pulse so `backscatter` is the RF standard deviation.
  std::vector<double> kernel(2 * static_cast<std::size_t>(std::ceil(kPulseHalfWidth * sigma)) + 1, 0.0);
  add_burst(kernel, static_cast<double>(kernel.size() / 2), 1.0, sigma, cps);
  double energy = 0;
  for (double k : kernel) energy += k * k;
  for (double& k : kernel) k /= std::sqrt(energy);
  const std::size_t half = kernel.size() / 2;

  const auto offsets = draw_offsets(p, e, rng);
  signal::Volume v(p.elements, p.elements, p.record_length, signal::Label::defect_free);
  v.set_sample_rate(p.sample_rate_hz);
  std::vector<double> white(p.record_length);
  for (std::size_t i = 0; i < v.n_ascans(); ++i) {
    auto a = v.ascan(i);
    add_burst(a, static_cast<double>(offsets[i]), e.front_wall, sigma, cps);
    // Scatterers start below the front surface.
    for (std::size_t t = 0; t < white.size(); ++t) white[t] = t > offsets[i] ? rng.normal() : 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) {
      double acc = 0;
      const std::size_t k_lo = t + half >= a.size() ? t + half - (a.size() - 1) : 0;
      const std::size_t k_hi = std::min(kernel.size() - 1, t + half);
      for (std::size_t k = k_lo; k <= k_hi; ++k) acc += kernel[k] * white[t + half - k];
      a[t] += e.backscatter * acc;
    }
  }
  return v;
}

NoiseModel fit_noise_model(const signal::Volume& reference, std::size_t length, std::string source) {
  require(reference.aligned(), ErrorCode::invalid_argument,
          "noise model: reference volume is not front-wall aligned");
  require(reference.n_time() <= length, ErrorCode::invalid_argument,
          "noise model: reference time extent exceeds the padded length");
  NoiseModel model;
  model.source = std::move(source);
  model.mean.assign(length, 0.0);
  model.stddev.assign(length, 0.0);
  // Shifted accumulation around the first A-scan: exact for identical traces.
  const double n = static_cast<double>(reference.n_ascans());
  const auto pivot = reference.ascan(0);
  std::vector<double> sum(reference.n_time(), 0.0), sum_sq(reference.n_time(), 0.0);
  for (std::size_t i = 0; i < reference.n_ascans(); ++i) {
    const auto a = reference.ascan(i);
    for (std::size_t t = 0; t < a.size(); ++t) {
      const double d = a[t] - pivot[t];
      sum[t] += d;
      sum_sq[t] += d * d;
    }
  }
  for (std::size_t t = 0; t < reference.n_time(); ++t) {
    const double m = sum[t] / n;
    model.mean[t] = pivot[t] + m;
    model.stddev[t] = std::sqrt(std::max(0.0, sum_sq[t] / n - m * m));
  }

  const double cutoff = kFrontWallTail * model.mean[0];
  std::size_t start = 1;
  while (start < reference.n_time() && model.mean[start] >= cutoff) ++start;
  require(start < reference.n_time(), ErrorCode::invalid_argument,
          "noise model: no time range past the front wall");
  model.start_index = start;
  return model;
}

void apply_noise(signal::Volume& v, const NoiseModel& model, Rng& rng) {
  require(v.aligned(), ErrorCode::invalid_argument, "apply_noise: volume is not front-wall aligned");
  require(model.mean.size() == model.stddev.size() && model.mean.size() >= v.n_time(),
          ErrorCode::shape_mismatch,
          "apply_noise: noise model covers " + std::to_string(model.mean.size()) +
              " samples, volume has " + std::to_string(v.n_time()));
  for (std::size_t i = 0; i < v.n_ascans(); ++i) {
    auto a = v.ascan(i);
    for (std::size_t t = model.start_index; t < a.size(); ++t) {
      const double noise = model.mean[t] + model.stddev[t] * rng.normal();
      a[t] = std::max(0.0, a[t] + noise);
    }
  }
  signal::normalize_volume(v);
}

void quantize(signal::Volume& v) {
  for (auto& x : v.data()) x = static_cast<double>(static_cast<float>(x));
}

}  // namespace utnas::phantom

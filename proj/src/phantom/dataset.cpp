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
#include "utnas/phantom/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

#include "utnas/common/error.hpp"
#include "utnas/signal/ascan.hpp"

namespace utnas::phantom {

namespace {

enum Stream : std::uint64_t { kReference = 0, kDefectFreeClean, kDefectClean, kSplit, kDefectNoise,
                              kDefectFreeNoise };

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view s, const std::string& key) {
  double v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && p == s.data() + s.size() && std::isfinite(v), ErrorCode::parse_error,
          "config: '" + key + "' expects a number, got '" + std::string(s) + "'");
  return v;
}

std::size_t parse_count(std::string_view s, const std::string& key) {
  std::size_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && p == s.data() + s.size(), ErrorCode::parse_error,
          "config: '" + key + "' expects a non-negative integer, got '" + std::string(s) + "'");
  return v;
}

SplitFractions parse_split(std::string_view s, const std::string& key) {
  double parts[3];
  for (int i = 0; i < 3; ++i) {
    const auto colon = s.find(':');
    require((i < 2) == (colon != std::string_view::npos), ErrorCode::parse_error,
            "config: '" + key + "' expects train:validation:test");
    parts[i] = parse_double(trim(s.substr(0, colon)), key);
    require(parts[i] >= 0, ErrorCode::parse_error, "config: split parts must be non-negative");
    if (colon != std::string_view::npos) s = s.substr(colon + 1);
  }
  const double total = parts[0] + parts[1] + parts[2];
  require(total > 0, ErrorCode::parse_error, "config: split parts sum to zero");
  return {parts[0] / total, parts[1] / total, parts[2] / total};
}

using Setter = std::function<void(SynthConfig&, std::string_view, const std::string&)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"thickness_mm", [](auto& c, auto v, auto& k) { c.material.thickness_mm = parse_double(v, k); }},
      {"sound_speed", [](auto& c, auto v, auto& k) { c.material.sound_speed = parse_double(v, k); }},
      {"density", [](auto& c, auto v, auto& k) { c.material.density = parse_double(v, k); }},
      {"elements", [](auto& c, auto v, auto& k) { c.probe.elements = parse_count(v, k); }},
      {"pitch_mm", [](auto& c, auto v, auto& k) { c.probe.pitch_mm = parse_double(v, k); }},
      {"scan_step_mm", [](auto& c, auto v, auto& k) { c.probe.scan_step_mm = parse_double(v, k); }},
      {"center_frequency_mhz",
       [](auto& c, auto v, auto& k) { c.probe.center_frequency_mhz = parse_double(v, k); }},
      {"fractional_bandwidth",
       [](auto& c, auto v, auto& k) { c.probe.fractional_bandwidth = parse_double(v, k); }},
      {"sample_rate_hz", [](auto& c, auto v, auto& k) { c.probe.sample_rate_hz = parse_double(v, k); }},
      {"record_length", [](auto& c, auto v, auto& k) { c.probe.record_length = parse_count(v, k); }},
      {"front_wall_amplitude", [](auto& c, auto v, auto& k) { c.echo.front_wall = parse_double(v, k); }},
      {"back_wall_amplitude", [](auto& c, auto v, auto& k) { c.echo.back_wall = parse_double(v, k); }},
      {"defect_amplitude", [](auto& c, auto v, auto& k) { c.echo.defect = parse_double(v, k); }},
      {"shadow_factor", [](auto& c, auto v, auto& k) { c.echo.shadow = parse_double(v, k); }},
      {"offset_min", [](auto& c, auto v, auto& k) { c.echo.offset_min = parse_count(v, k); }},
      {"offset_max", [](auto& c, auto v, auto& k) { c.echo.offset_max = parse_count(v, k); }},
      {"backscatter", [](auto& c, auto v, auto& k) { c.echo.backscatter = parse_double(v, k); }},
      {"diameter_min", [](auto& c, auto v, auto& k) { c.diameter.min = parse_double(v, k); }},
      {"diameter_max", [](auto& c, auto v, auto& k) { c.diameter.max = parse_double(v, k); }},
      {"diameter_step", [](auto& c, auto v, auto& k) { c.diameter.step = parse_double(v, k); }},
      {"depth_min", [](auto& c, auto v, auto& k) { c.depth.min = parse_double(v, k); }},
      {"depth_max", [](auto& c, auto v, auto& k) { c.depth.max = parse_double(v, k); }},
      {"depth_step", [](auto& c, auto v, auto& k) { c.depth.step = parse_double(v, k); }},
      {"n_noise", [](auto& c, auto v, auto& k) { c.n_noise = parse_count(v, k); }},
      {"padded_length", [](auto& c, auto v, auto& k) { c.padded_length = parse_count(v, k); }},
      {"split", [](auto& c, auto v, auto& k) { c.split = parse_split(v, k); }},
  };
  return table;
}

// Deals groups into train/validation/test by the configured fractions after a
// seeded shuffle.
std::vector<harness::Split> assign_groups(std::size_t n, const SplitFractions& f, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i)
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, std::int64_t(i) - 1))]);
  const auto n_train = static_cast<std::size_t>(std::llround(f.train * double(n)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(f.validation * double(n))));
  std::vector<harness::Split> split(n, harness::Split::test);
  for (std::size_t r = 0; r < n; ++r) {
    if (r < n_train) split[order[r]] = harness::Split::train;
    else if (r < n_train + n_val) split[order[r]] = harness::Split::validation;
  }
  return split;
}

std::string numbered(const char* fmt, std::size_t a, std::size_t b = 0) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, a, b);
  return buf;
}

}  // namespace

std::vector<double> Range::values() const {
  require(step > 0 && max >= min, ErrorCode::invalid_argument, "range: need step > 0 and max >= min");
  const auto n = static_cast<std::size_t>(std::floor((max - min) / step + 1e-9)) + 1;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = min + static_cast<double>(i) * step;
  return out;
}

SynthConfig parse_synth_config(std::string_view text) {
  SynthConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    auto line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string_view::npos, ErrorCode::parse_error,
            "config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const auto it = setters().find(key);
    require(it != setters().end(), ErrorCode::parse_error,
            "config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    it->second(cfg, trim(line.substr(eq + 1)), key);
  }
  return cfg;
}

std::string format_synth_config(const SynthConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "thickness_mm = " << c.material.thickness_mm << "\nsound_speed = " << c.material.sound_speed
     << "\ndensity = " << c.material.density << "\nelements = " << c.probe.elements
     << "\npitch_mm = " << c.probe.pitch_mm << "\nscan_step_mm = " << c.probe.scan_step_mm
     << "\ncenter_frequency_mhz = " << c.probe.center_frequency_mhz
     << "\nfractional_bandwidth = " << c.probe.fractional_bandwidth
     << "\nsample_rate_hz = " << c.probe.sample_rate_hz << "\nrecord_length = " << c.probe.record_length
     << "\nfront_wall_amplitude = " << c.echo.front_wall << "\nback_wall_amplitude = " << c.echo.back_wall
     << "\ndefect_amplitude = " << c.echo.defect << "\nshadow_factor = " << c.echo.shadow
     << "\noffset_min = " << c.echo.offset_min << "\noffset_max = " << c.echo.offset_max
     << "\nbackscatter = " << c.echo.backscatter << "\ndiameter_min = " << c.diameter.min
     << "\ndiameter_max = " << c.diameter.max << "\ndiameter_step = " << c.diameter.step
     << "\ndepth_min = " << c.depth.min << "\ndepth_max = " << c.depth.max
     << "\ndepth_step = " << c.depth.step << "\nn_noise = " << c.n_noise
     << "\npadded_length = " << c.padded_length << "\nsplit = " << c.split.train << ':'
     << c.split.validation << ':' << c.split.test << '\n';
  return os.str();
}

NoiseModel reference_noise_model(const SynthConfig& cfg, std::uint64_t seed) {
  // The hold-out record is long enough that, after alignment, backscatter
  // covers the whole padded axis; the aligned trace is then cut to length.
  auto probe = cfg.probe;
  probe.record_length = cfg.padded_length + cfg.echo.offset_max;
  Rng rng(derive_seed(seed, {kReference}));
  auto raw = simulate_reference(cfg.material, probe, cfg.echo, rng);
  signal::envelope_volume(raw);
  signal::normalize_volume(raw);
  signal::align_front_wall(raw);
  signal::Volume reference(raw.n_scan(), raw.n_array(), cfg.padded_length, raw.label());
  for (std::size_t i = 0; i < raw.n_ascans(); ++i) {
    const auto a = raw.ascan(i);
    std::copy(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(cfg.padded_length),
              reference.ascan(i).begin());
  }
  return fit_noise_model(reference, cfg.padded_length, "reference seed " + std::to_string(seed));
}

signal::Volume clean_volume(const SynthConfig& cfg, const std::optional<DefectSpec>& defect, Rng& rng) {
  auto v = simulate_volume(cfg.material, cfg.probe, cfg.echo, defect, rng);
  const auto alignment = signal::preprocess(v, cfg.padded_length);
  require(alignment.flagged.empty(), ErrorCode::numerical,
          "synth: " + std::to_string(alignment.flagged.size()) + " A-scans without a front-wall peak");
  return v;
}

DatasetSummary build_dataset(const SynthConfig& cfg, const std::filesystem::path& out,
                             std::uint64_t seed, bool overwrite) {
  require(cfg.n_noise >= 1, ErrorCode::invalid_argument, "synth: n_noise must be at least 1");
  validate(cfg.material, cfg.probe, cfg.echo);
  require(cfg.probe.record_length <= cfg.padded_length, ErrorCode::invalid_argument,
          "synth: record length exceeds padded length");
  require(overwrite || !std::filesystem::exists(out / harness::kManifestName), ErrorCode::io_error,
          "synth: " + (out / harness::kManifestName).string() + " already exists");
  const auto diameters = cfg.diameter.values();
  const auto depths = cfg.depth.values();
  const std::size_t n_sims = diameters.size() * depths.size();

  const auto model = reference_noise_model(cfg, seed);
  Rng split_rng(derive_seed(seed, {kSplit}));
  const auto defect_split = assign_groups(n_sims, cfg.split, split_rng);
  const auto free_split = assign_groups(n_sims * cfg.n_noise, cfg.split, split_rng);

  DatasetSummary summary;
  auto emit = [&](signal::Volume& v, const std::string& rel, harness::Split split) {
    quantize(v);
    harness::write_volume(v, out / rel);
    summary.entries.push_back({rel, v.label(), split});
    (v.label() == signal::Label::defect ? summary.defect : summary.defect_free)++;
    (split == harness::Split::train ? summary.train
     : split == harness::Split::validation ? summary.validation : summary.test)++;
  };

  std::size_t sim = 0;
  for (double diameter : diameters)
    for (double depth : depths) {
      Rng rng(derive_seed(seed, {kDefectClean, sim}));
      const auto defect = place_defect(diameter, depth, cfg.probe, rng);
      const auto clean = clean_volume(cfg, defect, rng);
      for (std::size_t k = 0; k < cfg.n_noise; ++k) {
        auto v = clean;
        Rng noise(derive_seed(seed, {kDefectNoise, sim, k}));
        apply_noise(v, model, noise);
        emit(v, numbered("defect/sim%03zu_n%zu.utv", sim, k), defect_split[sim]);
      }
      ++sim;
    }

  Rng free_rng(derive_seed(seed, {kDefectFreeClean}));
  const auto clean_free = clean_volume(cfg, std::nullopt, free_rng);
  for (std::size_t k = 0; k < n_sims * cfg.n_noise; ++k) {
    auto v = clean_free;
    Rng noise(derive_seed(seed, {kDefectFreeNoise, k}));
    apply_noise(v, model, noise);
    emit(v, numbered("defect_free/n%03zu.utv", k), free_split[k]);
  }

  harness::write_manifest(out, summary.entries);
  harness::write_text(out / "synth_config.txt",
                      "# seed = " + std::to_string(seed) + "\n" + format_synth_config(cfg));
  return summary;
}

}  // namespace utnas::phantom

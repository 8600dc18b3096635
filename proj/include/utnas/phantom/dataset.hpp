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
#include <string>
#include <string_view>
#include <vector>

#include "utnas/harness/io.hpp"
#include "utnas/phantom/phantom.hpp"

namespace utnas::phantom {

// Inclusive arithmetic grid min, min+step, ... <= max.
struct Range {
  double min = 0.0, max = 0.0, step = 1.0;
  std::vector<double> values() const;
};

struct SplitFractions {
  double train = 0.6, validation = 0.2, test = 0.2;
};

struct SynthConfig {
  MaterialSpec material;
  ProbeSpec probe;
  EchoModel echo;
  Range diameter{3.0, 15.0, 0.5};
  Range depth{1.5, 7.0, 1.5};
  std::size_t n_noise = 3;
  std::size_t padded_length = 1024;
  SplitFractions split;
};

// `key = value` lines; '#' starts a comment. Unknown keys are rejected.
SynthConfig parse_synth_config(std::string_view text);
std::string format_synth_config(const SynthConfig& cfg);

struct DatasetSummary {
  std::size_t defect = 0, defect_free = 0;
  std::size_t train = 0, validation = 0, test = 0;
  std::vector<harness::ManifestEntry> entries;
};

// Noise model fitted on a simulated hold-out reference.
NoiseModel reference_noise_model(const SynthConfig& cfg, std::uint64_t seed);

// Clean, preprocessed (enveloped, normalized, aligned, padded) simulation.
signal::Volume clean_volume(const SynthConfig& cfg, const std::optional<DefectSpec>& defect,
                            Rng& rng);

// Defect grid x n_noise noisy defect volumes and as many noisy defect-free
// volumes, written as UTV1 files with a manifest. Noise draws of one clean
// simulation always share a split. An existing manifest in `out` is an error
// unless `overwrite` is set.
DatasetSummary build_dataset(const SynthConfig& cfg, const std::filesystem::path& out,
                             std::uint64_t seed, bool overwrite = false);

}  // namespace utnas::phantom

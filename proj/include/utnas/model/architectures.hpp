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
#include <string>
#include <string_view>
#include <vector>

#include "utnas/model/model.hpp"

namespace utnas::model {

enum class Family { reduction, constant };
enum class Downsample { conv, maxpool };

std::string_view to_string(Family f);
std::string_view to_string(Downsample d);
Family parse_family(std::string_view text);
Downsample parse_downsample(std::string_view text);

inline const Shape kFullItemShape = {1, 64, 64, 1024};

struct ArchSpec {
  Family family = Family::reduction;
  Downsample downsample = Downsample::conv;
  std::vector<std::size_t> channels;  // one entry per block
  double dropout = 0.2;
  Shape item_shape = kFullItemShape;
};

// Default channel schedule of each family.
ArchSpec default_spec(Family family, Downsample downsample, Shape item_shape = kFullItemShape);

// Reduction family: two blocks shrinking only time by 4 with (1,1,7) kernels,
// then three cube-kernel feature blocks halving every axis. Each block is
// conv -> BN -> LReLU -> downsample -> BN -> LReLU.
Model build_reduction(const ArchSpec& spec);

// Constant family: four cuboidal (3,3,9) blocks with time factors 4,4,2,1 and
// spatial factors 1,1,1,2, then one cube-kernel block. Each block is
// downsample -> BN -> LReLU -> conv -> BN -> LReLU.
Model build_constant(const ArchSpec& spec);

Model build(const ArchSpec& spec);

// One-line descriptor, e.g.
// "arch family=reduction downsample=conv channels=4,4,24,112,160 dropout=0.2 input=1,64,64,1024"
std::string format_arch(const ArchSpec& spec);
ArchSpec parse_arch(std::string_view text);

// Parses "a,b,c" into extents.
Shape parse_extents(std::string_view text);
std::string format_extents(const Shape& s);

}  // namespace utnas::model

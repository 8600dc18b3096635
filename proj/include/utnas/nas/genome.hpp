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

#include "utnas/common/rng.hpp"
#include "utnas/model/model.hpp"

namespace utnas::nas {

enum class OpKind { depthwise, pointwise, skip, avg_pool, max_pool };

// A searched edge. Every op is stride 1 with same padding.
struct PrimitiveOp {
  OpKind kind = OpKind::skip;
  std::size_t kernel = 1;    // cube edge; 3, 5 or 7 for depthwise and pools
  std::size_t dilation = 1;  // 1..4 for depthwise, 1 otherwise
  bool norm = false;
  bool gelu = false;

  bool operator==(const PrimitiveOp&) const = default;
};

// All 77 legal ops in a fixed order.
const std::vector<PrimitiveOp>& legal_ops();
void validate(const PrimitiveOp& op);

// Tokens: dw<k>d<d>[+bn][+gelu] | pw[+bn][+gelu] | skip | ap<k>[...] | mp<k>[...]
std::string format_op(const PrimitiveOp& op);
PrimitiveOp parse_op(std::string_view token);

struct Block {
  std::size_t group = 0;
  PrimitiveOp op1, op2;

  bool operator==(const Block&) const = default;
};

inline constexpr std::size_t kMinBlocks = 2;
inline constexpr std::size_t kMaxBlocks = 4;

struct Genome {
  std::vector<Block> blocks;

  bool operator==(const Genome&) const = default;
  // Blocks per group, in order.
  std::vector<std::size_t> group_sizes() const;
};

void validate(const Genome& g);

// Block count uniform on {2, 3, 4}. After the first block a new group starts
// with probability 1/(s+1), s being the size of the current group. Each slot
// draws uniformly from legal_ops().
Genome sample_genome(Rng& rng);

// Probability of starting a new group after a group of size s.
constexpr double new_group_probability(std::size_t s) { return 1.0 / static_cast<double>(s + 1); }

// "genome v1 blocks=<n>" then one "block group=<g> op1=<tok> op2=<tok>" line
// per block.
std::string serialize_genome(const Genome& g);
Genome parse_genome(std::string_view text);

struct NasSpec {
  model::Shape item_shape = {1, 64, 64, 1024};
  std::size_t channels = 64;
  std::size_t bottleneck = 16;
  double dropout = 0.2;
};

// Stem (conv (2,2,4)/(2,2,4) 1->32, BN, GELU, conv (2,2,2)/(2,2,2) 32->64),
// an average-pool downsample (2,2,4), the residual groups with the same
// downsample between groups, then the classifier head. Downsampling windows
// are clamped per axis to the current extent.
model::Model instantiate(const Genome& g, const NasSpec& spec = {});

// "nas input=<C,D,H,W>" followed by the genome text.
std::string format_nas_descriptor(const Genome& g, const NasSpec& spec);
model::Model instantiate_descriptor(std::string_view descriptor);

}  // namespace utnas::nas

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

#include <optional>
#include <span>
#include <type_traits>

#include "utnas/common/rng.hpp"
#include "utnas/numerics/tensor.hpp"

namespace utnas::num {

// Keeps optional bias and span arguments out of template deduction.
template <typename T>
using NoDeduce = std::type_identity_t<T>;

enum class Mode { train, infer };
enum class PoolKind { max, avg };
enum class ActivationKind { leaky_relu, gelu, sigmoid };

inline constexpr double kLeakyReluSlope = 0.01;
inline constexpr double kBceClamp = 1e-7;

struct Conv3dOptions {
  Triple stride{1, 1, 1};
  Triple dilation{1, 1, 1};
  Triple padding{0, 0, 0};
  std::size_t groups = 1;
};

struct Pool3dOptions {
  Triple kernel{1, 1, 1};
  Triple stride{1, 1, 1};
  Triple dilation{1, 1, 1};
  Triple padding{0, 0, 0};
};

// floor((in + 2*pad - dilation*(k-1) - 1) / stride) + 1, or nullopt when the
// dilated kernel does not fit the padded extent.
std::optional<std::size_t> conv_output_extent(std::size_t in, std::size_t kernel,
                                              std::size_t stride, std::size_t dilation,
                                              std::size_t padding);

// Padding that keeps the extent unchanged at stride 1 for odd dilated kernels.
constexpr std::size_t same_padding(std::size_t kernel, std::size_t dilation) {
  return dilation * (kernel - 1) / 2;
}

// Name of a 5-D axis in [batch, channel, scan, array, time] order.
const char* axis_name(std::size_t axis);

// Output shape of conv3d/pool3d on the trailing three axes; throws
// shape_mismatch naming the first axis the window does not fit.
Triple window_output(const Shape& input, const Triple& kernel, const Triple& stride,
                     const Triple& dilation, const Triple& padding, const char* op);

// ---------------------------------------------------------------------------
// Elementwise and reductions.

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);

// ---------------------------------------------------------------------------
// Volumetric ops. Inputs are [B, C, D, H, W].

// Cross-correlation. weights: [Cout, Cin/groups, kD, kH, kW]; bias: [Cout].
template <typename T>
Tensor<T> conv3d(const Tensor<T>& input, const Tensor<T>& weights,
                 const std::optional<NoDeduce<Tensor<T>>>& bias, const Conv3dOptions& options);

// Max pooling ignores padded positions and routes the gradient to the lowest
// linear index among tied maxima. Average pooling counts zero padding in the
// window size.
template <typename T>
Tensor<T> pool3d(PoolKind kind, const Tensor<T>& input, const Pool3dOptions& options);

// [B, C, D, H, W] -> [B, C]
template <typename T> Tensor<T> global_avg_pool(const Tensor<T>& input);

// Per-channel normalization over every axis except axis 1. Train mode uses
// batch statistics (biased variance) and updates the running estimates with
// `momentum` (unbiased variance); infer mode uses the running estimates.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                     std::span<NoDeduce<T>> running_mean, std::span<NoDeduce<T>> running_var, Mode mode,
                     NoDeduce<T> momentum = T(0.1), NoDeduce<T> epsilon = T(1e-5));

template <typename T>
Tensor<T> activation(ActivationKind kind, const Tensor<T>& input,
                     NoDeduce<T> negative_slope = T(kLeakyReluSlope));

template <typename T>
Tensor<T> dropout(const Tensor<T>& input, double rate, Mode mode, Rng& rng);

// x: [B, F], weights: [O, F], bias: [O] -> [B, O]
template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weights,
                 const std::optional<NoDeduce<Tensor<T>>>& bias);

// Mean binary cross-entropy. probabilities: B values (any shape with B
// elements), clamped to [eps, 1-eps]; labels must be exactly 0 or 1.
template <typename T>
Tensor<T> bce_loss(const Tensor<T>& probabilities, std::span<const NoDeduce<T>> labels,
                   NoDeduce<T> clamp = T(kBceClamp));

}  // namespace utnas::num

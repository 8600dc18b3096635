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
#include <span>
#include <vector>

#include "utnas/numerics/tensor.hpp"

namespace utnas::num {

struct AdamHyper {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  std::uint64_t step = 0;
  std::vector<T> first_moment;
  std::vector<T> second_moment;
  AdamHyper hyper;
};

// One bias-corrected Adam update, in place:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
//   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
// Rejects non-finite gradients before touching any state.
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state);

// Adam over a fixed set of parameter tensors.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Tensor<T>> params, AdamHyper hyper = {});

  void step();
  void zero_grad();
  const std::vector<AdamState<T>>& states() const { return states_; }

 private:
  std::vector<Tensor<T>> params_;
  std::vector<AdamState<T>> states_;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace utnas::num

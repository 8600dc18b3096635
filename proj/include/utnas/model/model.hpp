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

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "utnas/model/layers.hpp"

namespace utnas::model {

using Trace = std::vector<std::pair<std::string, Shape>>;

// A network with a fixed per-item input shape [C, D, H, W] and a text
// descriptor from which it can be rebuilt.
class Model {
 public:
  Model(std::string descriptor, Shape item_shape, std::unique_ptr<Sequential> net);

  const std::string& descriptor() const { return descriptor_; }
  const Shape& item_shape() const { return item_shape_; }

  // [B, C, D, H, W] -> [B, 1] probabilities.
  Tensor forward(const Tensor& x, num::Mode mode, Rng* rng = nullptr);

  // Per-layer output shapes for a batch of `batch` items.
  Trace trace(std::size_t batch) const;
  std::string summary() const;

  // Every named tensor, buffers included, in a stable order.
  std::vector<Param> parameters();
  std::vector<Tensor> trainable();
  std::size_t param_count();

  void init(Rng& rng);

 private:
  std::string descriptor_;
  Shape item_shape_;
  std::unique_ptr<Sequential> net_;
};

}  // namespace utnas::model

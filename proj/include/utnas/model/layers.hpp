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
#include <optional>
#include <string>
#include <vector>

#include "utnas/common/rng.hpp"
#include "utnas/numerics/ops.hpp"

namespace utnas::model {

using Tensor = num::Tensor<float>;
using num::Shape;
using num::Triple;

struct Context {
  num::Mode mode = num::Mode::infer;
  Rng* rng = nullptr;  // required by dropout in train mode
};

// A named tensor owned by a layer. Buffers (batch-norm running statistics) are
// saved with the parameters but are not trained.
struct Param {
  std::string name;
  Tensor* tensor;
  bool trainable;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, const Context& ctx) = 0;
  // Shape propagation without computation; throws shape_mismatch.
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual std::string describe() const = 0;
  virtual void collect(const std::string& prefix, std::vector<Param>& out) {
    (void)prefix;
    (void)out;
  }
  virtual void init(Rng& rng) { (void)rng; }
  // Trace entries for nested containers; leaves report themselves.
  virtual void trace(const Shape& in, const std::string& prefix,
                     std::vector<std::pair<std::string, Shape>>& out) const;
};

using LayerPtr = std::unique_ptr<Layer>;

struct ConvSpec {
  std::size_t in = 1, out = 1;
  Triple kernel{1, 1, 1};
  Triple stride{1, 1, 1};
  Triple dilation{1, 1, 1};
  Triple padding{0, 0, 0};
  std::size_t groups = 1;
  bool bias = false;
};

// Weights use fan-in scaled normal initialization, std = sqrt(2 / fan_in);
// biases start at zero.
class Conv3d final : public Layer {
 public:
  explicit Conv3d(const ConvSpec& spec);
  Tensor forward(const Tensor& x, const Context& ctx) override;
  Shape output_shape(const Shape& in) const override;
  std::string describe() const override;
  void collect(const std::string& prefix, std::vector<Param>& out) override;
  void init(Rng& rng) override;

 private:
  ConvSpec spec_;
  Tensor weight_;
  std::optional<Tensor> bias_;
};

class BatchNorm final : public Layer {
 public:
  explicit BatchNorm(std::size_t channels);
  Tensor forward(const Tensor& x, const Context& ctx) override;
  Shape output_shape(const Shape& in) const override;
  std::string describe() const override;
  void collect(const std::string& prefix, std::vector<Param>& out) override;
  void init(Rng& rng) override;

 private:
  std::size_t channels_;
  Tensor gamma_, beta_, running_mean_, running_var_;
};

class Activation final : public Layer {
 public:
  explicit Activation(num::ActivationKind kind) : kind_(kind) {}
  Tensor forward(const Tensor& x, const Context& ctx) override;
  Shape output_shape(const Shape& in) const override { return in; }
  std::string describe() const override;

 private:
  num::ActivationKind kind_;
};

class Pool3d final : public Layer {
 public:
  Pool3d(num::PoolKind kind, const num::Pool3dOptions& options) : kind_(kind), options_(options) {}
  Tensor forward(const Tensor& x, const Context& ctx) override;
  Shape output_shape(const Shape& in) const override;
  std::string describe() const override;

 private:
  num::PoolKind kind_;
  num::Pool3dOptions options_;
};

// Non-overlapping average pooling whose window is clamped per axis to the
// input extent, so an axis that has already reached 1 is left alone.
class ClampedAvgPool final : public Layer {
 public:
  explicit ClampedAvgPool(Triple kernel) : kernel_(kernel) {}
  Tensor forward(const Tensor& x, const Context& ctx) override;
  Shape output_shape(const Shape& in) const override;
  std::string describe() const override;
  Triple effective_kernel(const Shape& in) const;

 private:
  Triple kernel_;
};

class GlobalAvgPool final : public Layer {
 public:
  Tensor forward(const Tensor& x, const Context& ctx) override;
  Shape output_shape(const Shape& in) const override;
  std::string describe() const override { return "global_avg_pool"; }
};

class Dropout final : public Layer {
 public:
  explicit Dropout(double rate) : rate_(rate) {}
  Tensor forward(const Tensor& x, const Context& ctx) override;
  Shape output_shape(const Shape& in) const override { return in; }
  std::string describe() const override;

 private:
  double rate_;
};

// Weights ~ U(-1/sqrt(in), 1/sqrt(in)), bias zero.
class Linear final : public Layer {
 public:
  Linear(std::size_t in, std::size_t out);
  Tensor forward(const Tensor& x, const Context& ctx) override;
  Shape output_shape(const Shape& in) const override;
  std::string describe() const override;
  void collect(const std::string& prefix, std::vector<Param>& out) override;
  void init(Rng& rng) override;

 private:
  std::size_t in_, out_;
  Tensor weight_, bias_;
};

class Sequential : public Layer {
 public:
  Sequential() = default;
  explicit Sequential(std::string name) : name_(std::move(name)) {}

  Sequential& add(LayerPtr layer);
  template <typename L, typename... Args>
  Sequential& emplace(Args&&... args) {
    return add(std::make_unique<L>(std::forward<Args>(args)...));
  }
  std::size_t size() const { return layers_.size(); }

  Tensor forward(const Tensor& x, const Context& ctx) override;
  Shape output_shape(const Shape& in) const override;
  std::string describe() const override;
  void collect(const std::string& prefix, std::vector<Param>& out) override;
  void init(Rng& rng) override;
  void trace(const Shape& in, const std::string& prefix,
             std::vector<std::pair<std::string, Shape>>& out) const override;

 private:
  std::string name_ = "sequential";
  std::vector<LayerPtr> layers_;
};

// x + body(x); the body must preserve shape.
class Residual final : public Layer {
 public:
  explicit Residual(std::unique_ptr<Sequential> body) : body_(std::move(body)) {}
  Tensor forward(const Tensor& x, const Context& ctx) override;
  Shape output_shape(const Shape& in) const override;
  std::string describe() const override { return "residual"; }
  void collect(const std::string& prefix, std::vector<Param>& out) override;
  void init(Rng& rng) override;
  void trace(const Shape& in, const std::string& prefix,
             std::vector<std::pair<std::string, Shape>>& out) const override;

 private:
  std::unique_ptr<Sequential> body_;
};

// Global average pool -> dropout -> single affine unit -> sigmoid.
std::unique_ptr<Sequential> classifier_head(std::size_t channels, double dropout_rate);

}  // namespace utnas::model

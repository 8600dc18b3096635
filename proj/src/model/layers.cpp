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
#include "utnas/model/layers.hpp"

#include <cmath>
#include <sstream>

#include "utnas/common/error.hpp"

namespace utnas::model {

namespace {

std::string triple(const Triple& t) {
  return "(" + std::to_string(t[0]) + "," + std::to_string(t[1]) + "," + std::to_string(t[2]) + ")";
}

void require_channels(const Shape& in, std::size_t channels, const char* op) {
  require(in.size() >= 2 && in[1] == channels, ErrorCode::shape_mismatch,
          std::string(op) + ": channel axis: expected " + std::to_string(channels) + ", input is " +
              num::to_string(in));
}

}  // namespace

void Layer::trace(const Shape& in, const std::string& prefix,
                  std::vector<std::pair<std::string, Shape>>& out) const {
  out.emplace_back(prefix + describe(), output_shape(in));
}

// ---------------------------------------------------------------------------

Conv3d::Conv3d(const ConvSpec& spec) : spec_(spec) {
  require(spec.groups > 0 && spec.in % spec.groups == 0 && spec.out % spec.groups == 0,
          ErrorCode::invalid_argument, "conv: channels not divisible by groups");
  weight_ = Tensor::zeros({spec.out, spec.in / spec.groups, spec.kernel[0], spec.kernel[1], spec.kernel[2]},
                          true);
  if (spec.bias) bias_ = Tensor::zeros({spec.out}, true);
}

Tensor Conv3d::forward(const Tensor& x, const Context&) {
  return num::conv3d(x, weight_, bias_,
                     {spec_.stride, spec_.dilation, spec_.padding, spec_.groups});
}

Shape Conv3d::output_shape(const Shape& in) const {
  require_channels(in, spec_.in, "conv");
  const auto o = num::window_output(in, spec_.kernel, spec_.stride, spec_.dilation, spec_.padding, "conv");
  return {in[0], spec_.out, o[0], o[1], o[2]};
}

std::string Conv3d::describe() const {
  std::ostringstream os;
  os << "conv " << spec_.in << "->" << spec_.out << " k" << triple(spec_.kernel) << " s"
     << triple(spec_.stride);
  if (spec_.dilation != Triple{1, 1, 1}) os << " d" << triple(spec_.dilation);
  if (spec_.padding != Triple{0, 0, 0}) os << " p" << triple(spec_.padding);
  if (spec_.groups != 1) os << " g" << spec_.groups;
  if (spec_.bias) os << " bias";
  return os.str();
}

void Conv3d::collect(const std::string& prefix, std::vector<Param>& out) {
  out.push_back({prefix + "weight", &weight_, true});
  if (bias_) out.push_back({prefix + "bias", &*bias_, true});
}

void Conv3d::init(Rng& rng) {
  const auto fan_in = static_cast<double>(weight_.size() / spec_.out);
  const double stddev = std::sqrt(2.0 / fan_in);
  for (auto& w : weight_.mutable_values()) w = static_cast<float>(rng.normal(0.0, stddev));
  if (bias_) std::fill(bias_->mutable_values().begin(), bias_->mutable_values().end(), 0.0f);
}

// ---------------------------------------------------------------------------

BatchNorm::BatchNorm(std::size_t channels)
    : channels_(channels),
      gamma_(Tensor::full({channels}, 1.0f, true)),
      beta_(Tensor::zeros({channels}, true)),
      running_mean_(Tensor::zeros({channels})),
      running_var_(Tensor::full({channels}, 1.0f)) {}

Tensor BatchNorm::forward(const Tensor& x, const Context& ctx) {
  return num::batch_norm(x, gamma_, beta_, running_mean_.mutable_values(), running_var_.mutable_values(),
                         ctx.mode);
}

Shape BatchNorm::output_shape(const Shape& in) const {
  require_channels(in, channels_, "batch_norm");
  return in;
}

std::string BatchNorm::describe() const { return "batch_norm " + std::to_string(channels_); }

void BatchNorm::collect(const std::string& prefix, std::vector<Param>& out) {
  out.push_back({prefix + "gamma", &gamma_, true});
  out.push_back({prefix + "beta", &beta_, true});
  out.push_back({prefix + "running_mean", &running_mean_, false});
  out.push_back({prefix + "running_var", &running_var_, false});
}

void BatchNorm::init(Rng&) {
  auto fill = [](Tensor& t, float v) { std::fill(t.mutable_values().begin(), t.mutable_values().end(), v); };
  fill(gamma_, 1.0f);
  fill(beta_, 0.0f);
  fill(running_mean_, 0.0f);
  fill(running_var_, 1.0f);
}

// ---------------------------------------------------------------------------

Tensor Activation::forward(const Tensor& x, const Context&) { return num::activation(kind_, x); }

std::string Activation::describe() const {
  switch (kind_) {
    case num::ActivationKind::leaky_relu: return "leaky_relu";
    case num::ActivationKind::gelu: return "gelu";
    case num::ActivationKind::sigmoid: return "sigmoid";
  }
  return "activation";
}

Tensor Pool3d::forward(const Tensor& x, const Context&) { return num::pool3d(kind_, x, options_); }

Shape Pool3d::output_shape(const Shape& in) const {
  const auto o = num::window_output(in, options_.kernel, options_.stride, options_.dilation,
                                    options_.padding, "pool");
  return {in[0], in[1], o[0], o[1], o[2]};
}

std::string Pool3d::describe() const {
  std::string s = kind_ == num::PoolKind::max ? "max_pool" : "avg_pool";
  s += " k" + triple(options_.kernel) + " s" + triple(options_.stride);
  if (options_.padding != Triple{0, 0, 0}) s += " p" + triple(options_.padding);
  return s;
}

Triple ClampedAvgPool::effective_kernel(const Shape& in) const {
  require(in.size() == 5, ErrorCode::shape_mismatch, "avg_pool: expected a 5-D input, got " + num::to_string(in));
  Triple k;
  for (std::size_t a = 0; a < 3; ++a) {
    require(in[2 + a] > 0, ErrorCode::shape_mismatch,
            std::string("avg_pool: ") + num::axis_name(2 + a) + " axis is empty");
    k[a] = std::min(kernel_[a], in[2 + a]);
  }
  return k;
}

Tensor ClampedAvgPool::forward(const Tensor& x, const Context&) {
  const auto k = effective_kernel(x.shape());
  return num::pool3d(num::PoolKind::avg, x, {k, k, {1, 1, 1}, {0, 0, 0}});
}

Shape ClampedAvgPool::output_shape(const Shape& in) const {
  const auto k = effective_kernel(in);
  return {in[0], in[1], in[2] / k[0], in[3] / k[1], in[4] / k[2]};
}

std::string ClampedAvgPool::describe() const { return "avg_pool k<=" + triple(kernel_); }

Tensor GlobalAvgPool::forward(const Tensor& x, const Context&) { return num::global_avg_pool(x); }

Shape GlobalAvgPool::output_shape(const Shape& in) const {
  require(in.size() == 5, ErrorCode::shape_mismatch,
          "global_avg_pool: expected a 5-D input, got " + num::to_string(in));
  return {in[0], in[1]};
}

Tensor Dropout::forward(const Tensor& x, const Context& ctx) {
  if (ctx.mode == num::Mode::infer || rate_ == 0.0) return x;
  require(ctx.rng != nullptr, ErrorCode::state_error, "dropout: train mode needs a random stream");
  return num::dropout(x, rate_, ctx.mode, *ctx.rng);
}

std::string Dropout::describe() const {
  std::ostringstream os;
  os << "dropout " << rate_;
  return os.str();
}

Linear::Linear(std::size_t in, std::size_t out)
    : in_(in), out_(out), weight_(Tensor::zeros({out, in}, true)), bias_(Tensor::zeros({out}, true)) {}

Tensor Linear::forward(const Tensor& x, const Context&) { return num::linear(x, weight_, bias_); }

Shape Linear::output_shape(const Shape& in) const {
  require(in.size() == 2 && in[1] == in_, ErrorCode::shape_mismatch,
          "linear: expected [B, " + std::to_string(in_) + "], got " + num::to_string(in));
  return {in[0], out_};
}

std::string Linear::describe() const {
  return "linear " + std::to_string(in_) + "->" + std::to_string(out_);
}

void Linear::collect(const std::string& prefix, std::vector<Param>& out) {
  out.push_back({prefix + "weight", &weight_, true});
  out.push_back({prefix + "bias", &bias_, true});
}

void Linear::init(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
  for (auto& w : weight_.mutable_values()) w = static_cast<float>(rng.uniform(-bound, bound));
  std::fill(bias_.mutable_values().begin(), bias_.mutable_values().end(), 0.0f);
}

// ---------------------------------------------------------------------------

Sequential& Sequential::add(LayerPtr layer) {
  layers_.push_back(std::move(layer));
  return *this;
}

Tensor Sequential::forward(const Tensor& x, const Context& ctx) {
  Tensor h = x;
  for (auto& l : layers_) h = l->forward(h, ctx);
  return h;
}

Shape Sequential::output_shape(const Shape& in) const {
  Shape s = in;
  for (const auto& l : layers_) s = l->output_shape(s);
  return s;
}

std::string Sequential::describe() const { return name_; }

void Sequential::collect(const std::string& prefix, std::vector<Param>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->collect(prefix + std::to_string(i) + ".", out);
}

void Sequential::init(Rng& rng) {
  for (auto& l : layers_) l->init(rng);
}

void Sequential::trace(const Shape& in, const std::string& prefix,
                       std::vector<std::pair<std::string, Shape>>& out) const {
  Shape s = in;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->trace(s, prefix + std::to_string(i) + " ", out);
    s = layers_[i]->output_shape(s);
  }
}

Tensor Residual::forward(const Tensor& x, const Context& ctx) { return num::add(x, body_->forward(x, ctx)); }

Shape Residual::output_shape(const Shape& in) const {
  const auto out = body_->output_shape(in);
  require(out == in, ErrorCode::shape_mismatch,
          "residual: body maps " + num::to_string(in) + " to " + num::to_string(out));
  return in;
}

void Residual::collect(const std::string& prefix, std::vector<Param>& out) { body_->collect(prefix, out); }

void Residual::init(Rng& rng) { body_->init(rng); }

void Residual::trace(const Shape& in, const std::string& prefix,
                     std::vector<std::pair<std::string, Shape>>& out) const {
  body_->trace(in, prefix, out);
  out.emplace_back(prefix + "residual add", output_shape(in));
}

std::unique_ptr<Sequential> classifier_head(std::size_t channels, double dropout_rate) {
  auto head = std::make_unique<Sequential>("head");
  head->emplace<GlobalAvgPool>();
  head->emplace<Dropout>(dropout_rate);
  head->emplace<Linear>(channels, 1);
  head->emplace<Activation>(num::ActivationKind::sigmoid);
  return head;
}

}  // namespace utnas::model

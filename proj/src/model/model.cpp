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
#include "utnas/model/model.hpp"

#include <sstream>

#include "utnas/common/error.hpp"

namespace utnas::model {

Model::Model(std::string descriptor, Shape item_shape, std::unique_ptr<Sequential> net)
    : descriptor_(std::move(descriptor)), item_shape_(std::move(item_shape)), net_(std::move(net)) {
  require(item_shape_.size() == 4, ErrorCode::invalid_argument,
          "model: item shape must be [C, D, H, W], got " + num::to_string(item_shape_));
  Shape in = {1};
  in.insert(in.end(), item_shape_.begin(), item_shape_.end());
  const auto out = net_->output_shape(in);
  require(out == Shape{1, 1}, ErrorCode::shape_mismatch,
          "model: network must end in one probability per item, got " + num::to_string(out));
}

Tensor Model::forward(const Tensor& x, num::Mode mode, Rng* rng) {
  require(x.rank() == 5 && Shape(x.shape().begin() + 1, x.shape().end()) == item_shape_,
          ErrorCode::shape_mismatch,
          "model: input " + num::to_string(x.shape()) + " does not match item shape " +
              num::to_string(item_shape_));
  return net_->forward(x, Context{mode, rng});
}

Trace Model::trace(std::size_t batch) const {
  Shape in = {batch};
  in.insert(in.end(), item_shape_.begin(), item_shape_.end());
  Trace out;
  out.emplace_back("input", in);
  net_->trace(in, "", out);
  return out;
}

std::string Model::summary() const {
  std::ostringstream os;
  os << descriptor_ << "\n";
  for (const auto& [name, shape] : trace(1)) os << "  " << name << "  " << num::to_string(shape) << "\n";
  auto& self = const_cast<Model&>(*this);
  os << "parameters " << self.param_count() << "\n";
  return os.str();
}

std::vector<Param> Model::parameters() {
  std::vector<Param> out;
  net_->collect("", out);
  return out;
}

std::vector<Tensor> Model::trainable() {
  std::vector<Tensor> out;
  for (const auto& p : parameters())
    if (p.trainable) out.push_back(*p.tensor);
  return out;
}

std::size_t Model::param_count() {
  std::size_t n = 0;
  for (const auto& p : parameters())
    if (p.trainable) n += p.tensor->size();
  return n;
}

void Model::init(Rng& rng) { net_->init(rng); }

}  // namespace utnas::model

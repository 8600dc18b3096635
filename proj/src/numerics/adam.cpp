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
#include "utnas/numerics/adam.hpp"

#include <cmath>

#include "utnas/common/error.hpp"

namespace utnas::num {

template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state) {
  require(params.size() == grads.size(), ErrorCode::shape_mismatch,
          "adam_step: " + std::to_string(grads.size()) + " gradients for " +
              std::to_string(params.size()) + " parameters");
  if (state.first_moment.empty() && state.second_moment.empty()) {
    state.first_moment.assign(params.size(), T(0));
    state.second_moment.assign(params.size(), T(0));
  }
  require(state.first_moment.size() == params.size() && state.second_moment.size() == params.size(),
          ErrorCode::shape_mismatch, "adam_step: moment buffers do not match the parameter size");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    require(std::isfinite(grads[i]), ErrorCode::numerical,
            "adam_step: non-finite gradient at element " + std::to_string(i));
  }

  ++state.step;
  const auto& h = state.hyper;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(h.beta1);
  const T b2 = static_cast<T>(h.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grads[i];
    T& m = state.first_moment[i];
    T& v = state.second_moment[i];
    m = b1 * m + (T(1) - b1) * g;
    v = b2 * v + (T(1) - b2) * g * g;
    const double m_hat = static_cast<double>(m) / c1;
    const double v_hat = static_cast<double>(v) / c2;
    params[i] -= static_cast<T>(h.lr * m_hat / (std::sqrt(v_hat) + h.epsilon));
  }
}

template <typename T>
Adam<T>::Adam(std::vector<Tensor<T>> params, AdamHyper hyper) : params_(std::move(params)) {
  states_.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    states_[i].hyper = hyper;
    states_[i].first_moment.assign(params_[i].size(), T(0));
    states_[i].second_moment.assign(params_[i].size(), T(0));
  }
}

template <typename T>
void Adam<T>::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].has_grad()) continue;
    for (auto g : params_[i].grad()) {
      require(std::isfinite(g), ErrorCode::numerical,
              "adam: non-finite gradient in parameter " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.has_grad()) p.mutable_grad();
    adam_step<T>(p.mutable_values(), p.grad(), states_[i]);
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template void adam_step(std::span<float>, std::span<const float>, AdamState<float>&);
template void adam_step(std::span<double>, std::span<const double>, AdamState<double>&);
template class Adam<float>;
template class Adam<double>;

}  // namespace utnas::num

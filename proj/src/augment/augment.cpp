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
#include "utnas/augment/augment.hpp"

#include <cmath>
#include <string>

#include "utnas/common/error.hpp"

namespace utnas::augment {

namespace {

void require_aligned(const signal::Volume& v, const char* op) {
  require(v.aligned(), ErrorCode::invalid_argument,
          std::string(op) + ": volume is not front-wall aligned");
}

void require_fits(const signal::Volume& v, const AugmentConfig& cfg, const char* op) {
  require(v.n_time() <= cfg.padded_length, ErrorCode::shape_mismatch,
          std::string(op) + ": time extent " + std::to_string(v.n_time()) +
              " exceeds padded length " + std::to_string(cfg.padded_length));
}

// Each A-scan draws from its own stream so the result does not depend on
// processing order.
template <typename F>
signal::Volume per_ascan(const signal::Volume& v, std::size_t out_time, Rng& rng, F&& f) {
  const auto seed = rng.next_u64();
  signal::Volume out(v.n_scan(), v.n_array(), out_time, v.label());
  out.set_sample_rate(v.sample_rate());
  for (std::size_t i = 0; i < v.n_ascans(); ++i) {
    Rng local(derive_seed(seed, {i}));
    f(v.ascan(i), out.ascan(i), local);
  }
  return out;
}

signal::Volume scale_unchecked(const signal::Volume& v, const AugmentConfig& cfg, Rng& rng) {
  return per_ascan(v, v.n_time(), rng, [&](auto in, auto out, Rng& r) {
    std::copy(in.begin(), in.end(), out.begin());
    scale_ascan(out, r.uniform(cfg.scale_lo, cfg.scale_hi));
  });
}

signal::Volume dilate_unchecked(const signal::Volume& v, const AugmentConfig& cfg, Rng& rng) {
  const auto m = static_cast<std::int64_t>(cfg.max_dilation);
  return per_ascan(v, cfg.padded_length, rng, [&](auto in, auto out, Rng& r) {
    const auto resampled = dilate_ascan(in, r.uniform_int(-m, m), cfg.padded_length);
    std::copy(resampled.begin(), resampled.end(), out.begin());
  });
}

}  // namespace

void AugmentConfig::validate() const {
  require(scale_lo > 0 && scale_lo <= scale_hi && scale_hi < 2, ErrorCode::invalid_argument,
          "augment: scale range must satisfy 0 < lo <= hi < 2");
  require(padded_length > 0, ErrorCode::invalid_argument, "augment: padded length must be positive");
  require(max_dilation < padded_length, ErrorCode::invalid_argument,
          "augment: max dilation must be below the padded length");
}

void scale_ascan(std::span<double> samples, double factor) {
  for (std::size_t t = 1; t < samples.size(); ++t) samples[t] *= factor;
}

std::vector<double> dilate_ascan(std::span<const double> samples, std::int64_t delta,
                                 std::size_t length) {
  require(samples.size() >= 2, ErrorCode::invalid_argument, "dilate: need at least 2 samples");
  const auto span = static_cast<std::int64_t>(samples.size()) - 1;
  require(span + delta >= 1, ErrorCode::invalid_argument,
          "dilate: stretch " + std::to_string(delta) + " collapses the segment");
  const auto target = span + delta;
  const auto n_out = std::min<std::size_t>(length, static_cast<std::size_t>(target) + 1);
  std::vector<double> out(length, 0.0);
  for (std::size_t j = 0; j < n_out; ++j) {
    // Exact rational source position j * span / target.
    const auto num = static_cast<std::int64_t>(j) * span;
    const auto i0 = static_cast<std::size_t>(num / target);
    const auto rem = num % target;
    if (rem == 0) {
      out[j] = samples[i0];
    } else {
      const double w = static_cast<double>(rem) / static_cast<double>(target);
      out[j] = (1.0 - w) * samples[i0] + w * samples[i0 + 1];
    }
  }
  return out;
}

signal::Volume scale_augment(const signal::Volume& v, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  require_aligned(v, "scale_augment");
  return scale_unchecked(v, cfg, rng);
}

signal::Volume dilate_augment(const signal::Volume& v, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  require_aligned(v, "dilate_augment");
  require_fits(v, cfg, "dilate_augment");
  return dilate_unchecked(v, cfg, rng);
}

std::vector<signal::Volume> augment_batch(const std::vector<signal::Volume>& batch,
                                          const AugmentConfig& cfg, Rng& rng) {
  if (!cfg.enabled) return batch;
  cfg.validate();
  std::vector<signal::Volume> out;
  out.reserve(batch.size());
  for (const auto& v : batch) {
    require_aligned(v, "augment_batch");
    require_fits(v, cfg, "augment_batch");
    // Scaling past the peak can lift the front-wall tail above the peak, so
    // alignment is checked once on the input.
    out.push_back(dilate_unchecked(scale_unchecked(v, cfg, rng), cfg, rng));
  }
  return out;
}

}  // namespace utnas::augment

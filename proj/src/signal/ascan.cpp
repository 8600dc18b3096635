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
#include "utnas/signal/ascan.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <numeric>
#include <string>

#include "utnas/common/error.hpp"

namespace utnas::signal {

namespace {

// Forward/inverse complex transforms of one length on a private buffer.
class AnalyticPlan {
 public:
  explicit AnalyticPlan(std::size_t n) : n_(n) {
    buf_ = fftw_alloc_complex(n);
    require(buf_ != nullptr, ErrorCode::io_error, "envelope: FFT buffer allocation failed");
    const int len = static_cast<int>(n);
    forward_ = fftw_plan_dft_1d(len, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_1d(len, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~AnalyticPlan() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
    fftw_free(buf_);
  }
  AnalyticPlan(const AnalyticPlan&) = delete;
  AnalyticPlan& operator=(const AnalyticPlan&) = delete;

  void run(std::span<const double> x, double offset, std::span<double> out) {
    for (std::size_t i = 0; i < n_; ++i) {
      buf_[i][0] = x[i] - offset;
      buf_[i][1] = 0.0;
    }
    fftw_execute(forward_);
    // One-sided spectrum: keep DC (and Nyquist for even n), double positive
    // frequencies, zero negative ones.
    const std::size_t half = n_ / 2;
    const std::size_t last_doubled = (n_ % 2 == 0) ? half - 1 : half;
    for (std::size_t k = 1; k <= last_doubled; ++k) {
      buf_[k][0] *= 2.0;
      buf_[k][1] *= 2.0;
    }
    for (std::size_t k = last_doubled + 1 + (n_ % 2 == 0 ? 1 : 0); k < n_; ++k) {
      buf_[k][0] = 0.0;
      buf_[k][1] = 0.0;
    }
    fftw_execute(inverse_);
    const double scale = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = std::hypot(buf_[i][0], buf_[i][1]) * scale;
  }

 private:
  std::size_t n_;
  fftw_complex* buf_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

AnalyticPlan& plan_for(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<AnalyticPlan>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<AnalyticPlan>(n);
  return *slot;
}

void envelope_into(std::span<const double> x, std::span<double> out) {
  require(x.size() >= 4, ErrorCode::invalid_argument,
          "envelope: A-scan needs at least 4 samples, got " + std::to_string(x.size()));
  for (double v : x) require(std::isfinite(v), ErrorCode::numerical, "envelope: non-finite sample");
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  plan_for(x.size()).run(x, mean, out);
}

}  // namespace

std::vector<double> envelope(std::span<const double> samples) {
  std::vector<double> out(samples.size());
  envelope_into(samples, out);
  return out;
}

AScan envelope(const AScan& a) { return AScan{envelope(a.samples), a.sample_rate}; }

void envelope_volume(Volume& v) {
  std::vector<double> tmp(v.n_time());
  for (std::size_t i = 0; i < v.n_ascans(); ++i) {
    auto a = v.ascan(i);
    envelope_into(a, tmp);
    std::copy(tmp.begin(), tmp.end(), a.begin());
  }
}

void normalize_volume(Volume& v) {
  const double peak = v.max_value();
  require(peak > 0.0 && std::isfinite(peak), ErrorCode::invalid_argument,
          "normalize: volume maximum must be positive and finite");
  for (auto& x : v.data()) x /= peak;
}

Alignment align_front_wall(Volume& v, double guard) {
  const double threshold = guard * v.max_value();
  Alignment result;
  result.shifts.assign(v.n_ascans(), 0);
  std::vector<std::size_t> peaks(v.n_ascans(), 0);
  for (std::size_t i = 0; i < v.n_ascans(); ++i) {
    auto a = v.ascan(i);
    const auto it = std::max_element(a.begin(), a.end());
    const auto peak = static_cast<std::size_t>(it - a.begin());
    if (!(*it > threshold) || *it <= 0.0) {
      result.flagged.push_back(i);
      peaks[i] = peak;
      continue;
    }
    std::copy(a.begin() + static_cast<std::ptrdiff_t>(peak), a.end(), a.begin());
    std::fill(a.end() - static_cast<std::ptrdiff_t>(peak), a.end(), 0.0);
    result.shifts[i] = peak;
  }
  v.set_front_wall_index(std::move(peaks));
  return result;
}

std::vector<double> pad_to_length(std::span<const double> samples, std::size_t length) {
  require(samples.size() <= length, ErrorCode::invalid_argument,
          "pad: A-scan of length " + std::to_string(samples.size()) +
              " exceeds target length " + std::to_string(length));
  std::vector<double> out(length, 0.0);
  std::copy(samples.begin(), samples.end(), out.begin());
  return out;
}

void pad_volume(Volume& v, std::size_t length) {
  if (v.n_time() == length) return;
  require(v.n_time() <= length, ErrorCode::invalid_argument,
          "pad: volume time extent " + std::to_string(v.n_time()) + " exceeds target length " +
              std::to_string(length));
  Volume out(v.n_scan(), v.n_array(), length, v.label());
  out.set_sample_rate(v.sample_rate());
  for (std::size_t i = 0; i < v.n_ascans(); ++i) {
    const auto a = v.ascan(i);
    std::copy(a.begin(), a.end(), out.ascan(i).begin());
  }
  out.set_front_wall_index(v.front_wall_index());
  v = std::move(out);
}

Alignment preprocess(Volume& v, std::size_t padded_length, double guard) {
  envelope_volume(v);
  normalize_volume(v);
  auto alignment = align_front_wall(v, guard);
  pad_volume(v, padded_length);
  return alignment;
}

}  // namespace utnas::signal

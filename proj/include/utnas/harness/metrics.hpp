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
#include <optional>
#include <string>
#include <vector>

namespace utnas::harness {

// Positives are volumes containing a defect.
struct Confusion {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::uint64_t total() const { return tp + tn + fp + fn; }
};

// Precision, recall and F1 are empty when their denominator is zero.
struct Metrics {
  double accuracy = 0.0;
  std::optional<double> precision, recall, f1;
};

Metrics metrics_from_confusion(const Confusion& c);

// "undefined" for an empty value, otherwise fixed with `digits` decimals.
std::string format_metric(const std::optional<double>& v, int digits = 3);

// Simple mean and population standard deviation over the defined values;
// `defined` counts them. Both are empty when no value is defined.
struct Aggregate {
  std::optional<double> mean, stddev;
  std::size_t defined = 0;
};

Aggregate aggregate(const std::vector<std::optional<double>>& values);

}  // namespace utnas::harness

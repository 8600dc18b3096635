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
#include "utnas/harness/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "utnas/common/error.hpp"

namespace utnas::harness {

Metrics metrics_from_confusion(const Confusion& c) {
  require(c.total() > 0, ErrorCode::invalid_argument, "metrics: empty confusion matrix");
  Metrics m;
  m.accuracy = double(c.tp + c.tn) / double(c.total());
  if (c.tp + c.fp > 0) m.precision = double(c.tp) / double(c.tp + c.fp);
  if (c.tp + c.fn > 0) m.recall = double(c.tp) / double(c.tp + c.fn);
  if (m.precision && m.recall && *m.precision + *m.recall > 0)
    m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
  return m;
}

std::string format_metric(const std::optional<double>& v, int digits) {
  if (!v) return "undefined";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, *v);
  return buf;
}

Aggregate aggregate(const std::vector<std::optional<double>>& values) {
  Aggregate a;
  double sum = 0;
  for (const auto& v : values)
    if (v) sum += *v, ++a.defined;
  if (a.defined == 0) return a;
  const double mean = sum / double(a.defined);
  double ss = 0;
  for (const auto& v : values)
    if (v) ss += (*v - mean) * (*v - mean);
  a.mean = mean;
  a.stddev = std::sqrt(ss / double(a.defined));
  return a;
}

}  // namespace utnas::harness

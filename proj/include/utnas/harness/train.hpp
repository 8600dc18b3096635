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
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "utnas/augment/augment.hpp"
#include "utnas/harness/data.hpp"
#include "utnas/harness/metrics.hpp"
#include "utnas/model/model.hpp"
#include "utnas/numerics/adam.hpp"

namespace utnas::harness {

struct TrainConfig {
  num::AdamHyper adam;  // lr 0.001, betas 0.9 / 0.999
  std::size_t batch_size = 8;
  std::size_t eval_interval = 10;  // batches
  std::size_t max_batches = 1000;
  augment::AugmentConfig augment;  // padded_length follows the data
  std::uint64_t seed = 0;

  void validate() const;
};

struct EvalPoint {
  std::size_t batch = 0;  // batches completed
  double train_loss = 0;  // mean over the batches since the previous point
  double val_loss = 0;
};

using Snapshot = std::vector<std::vector<float>>;

Snapshot snapshot(model::Model& m);
void restore(model::Model& m, const Snapshot& s);

struct TrainResult {
  std::vector<EvalPoint> trace;
  std::optional<std::size_t> best;  // index into trace
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t best_batch = 0;
};

// Adam on mean BCE over shuffled minibatches (a fresh permutation per epoch,
// partial tail batches dropped). Every eval_interval batches the validation
// loss is recorded and the parameters are snapshotted; the model is left
// holding the first snapshot with the lowest loss, or its initial parameters
// if no evaluation happened. A non-finite training loss throws `numerical`
// with the trace so far.
TrainResult train_one(model::Model& m, const TrainSet& train, const ValidationSet& val,
                      const TrainConfig& cfg);

// Infer-mode probabilities, one per volume.
std::vector<float> predict(model::Model& m, const std::vector<signal::Volume>& volumes,
                           std::size_t batch_size = 8);

// Mean BCE in infer mode.
template <Split S>
double mean_loss(model::Model& m, const SplitSet<S>& set, std::size_t batch_size = 8);

struct Evaluation {
  Confusion confusion;
  Metrics metrics;
  std::vector<float> probabilities;
};

// probability >= threshold counts as a predicted defect.
Evaluation evaluate(model::Model& m, const TestSet& test, double threshold = 0.5);
Evaluation evaluate_probabilities(const std::vector<float>& p, const std::vector<float>& labels,
                                  double threshold);

struct RunRecord {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  bool aborted = false;
  std::string message;
  std::size_t best_batch = 0;
  double best_val_loss = 0;
  Confusion confusion;
  Metrics metrics;
};

struct RunReport {
  std::string model;     // short name for tables
  std::string augment;   // "on" or "off"
  std::string descriptor;
  bool exclude_aborted = false;
  std::vector<RunRecord> runs;
};

struct ReportSummary {
  Aggregate accuracy, precision, recall, f1;
  std::size_t included = 0, aborted = 0;
};

// Simple means and population standard deviations over the included runs.
// Aborted runs make this throw unless the report excludes them explicitly.
ReportSummary summarize(const RunReport& r);

std::string format_report(const RunReport& r);
RunReport parse_report(std::string_view text);

// Rows of (model, augment, summary) shaped as mean/std columns for
// accuracy, F1, precision and recall.
std::string format_table(const std::vector<RunReport>& reports);

using ModelFactory = std::function<model::Model()>;
using RunHook = std::function<void(std::size_t run, model::Model&, const TrainResult&)>;

using TestLoader = std::function<const TestSet&()>;

// Trains `runs` fresh models on seeds derived from cfg.seed and the run index,
// then loads the test split once and evaluates each selected checkpoint.
RunReport repeat_runs(const ModelFactory& factory, const TrainSet& train, const ValidationSet& val,
                      const TestLoader& load_test, const TrainConfig& cfg, std::size_t runs,
                      const RunHook& on_run = {}, double threshold = 0.5);
RunReport repeat_runs(const ModelFactory& factory, const TrainSet& train, const ValidationSet& val,
                      const TestSet& test, const TrainConfig& cfg, std::size_t runs,
                      const RunHook& on_run = {}, double threshold = 0.5);

// Seeds for one run: parameter init and the training streams.
std::uint64_t run_seed(std::uint64_t seed, std::size_t run);
std::uint64_t init_seed(std::uint64_t run_seed);

}  // namespace utnas::harness

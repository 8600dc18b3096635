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
#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numbers>

#include "toy.hpp"
#include "utnas/common/error.hpp"
#include "utnas/harness/checkpoint.hpp"
#include "utnas/harness/train.hpp"
#include "utnas/model/architectures.hpp"
#include "utnas/nas/genome.hpp"

namespace utnas::harness {
namespace {

using testing::toy_volumes;

const model::Shape kToy = {1, 8, 8, 128};

model::Model toy_model() {
  return model::build(model::default_spec(model::Family::reduction, model::Downsample::maxpool, kToy));
}

struct ToyData {
  TrainSet train;
  ValidationSet val;
  TestSet test;
};

ToyData toy_data(std::uint64_t seed, std::size_t n_train = 32, std::size_t n_val = 16, std::size_t n_test = 16) {
  Rng rng(seed);
  return {TrainSet(toy_volumes(n_train, 8, 8, 128, rng)), ValidationSet(toy_volumes(n_val, 8, 8, 128, rng)),
          TestSet(toy_volumes(n_test, 8, 8, 128, rng))};
}

// Zero weights and a fixed bias in the final affine unit give a constant
// probability sigmoid(bias).
void force_constant(model::Model& m, float bias) {
  auto params = m.parameters();
  for (auto& p : params) {
    if (p.name.find("head") == std::string::npos && p.name.rfind(std::to_string(5) + ".", 0) != 0) continue;
    if (p.name.ends_with("weight")) std::fill(p.tensor->mutable_values().begin(), p.tensor->mutable_values().end(), 0.0f);
    if (p.name.ends_with("bias")) std::fill(p.tensor->mutable_values().begin(), p.tensor->mutable_values().end(), bias);
  }
}

TEST(Metrics, PerfectClassifier) {
  const auto m = metrics_from_confusion({25, 25, 0, 0});
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(*m.precision, 1.0);
  EXPECT_EQ(*m.recall, 1.0);
  EXPECT_EQ(*m.f1, 1.0);
}

TEST(Metrics, WorkedExample) {
  const auto m = metrics_from_confusion({3, 4, 1, 2});
  EXPECT_DOUBLE_EQ(m.accuracy, 0.7);
  EXPECT_DOUBLE_EQ(*m.precision, 0.75);
  EXPECT_DOUBLE_EQ(*m.recall, 0.6);
  EXPECT_NEAR(*m.f1, 0.9 / 1.35, 1e-15);
}

TEST(Metrics, UndefinedMarkers) {
  const auto m = metrics_from_confusion({0, 5, 0, 3});
  EXPECT_FALSE(m.precision);
  EXPECT_EQ(*m.recall, 0.0);
  EXPECT_FALSE(m.f1);
  EXPECT_EQ(format_metric(m.precision), "undefined");
  const auto n = metrics_from_confusion({0, 5, 2, 0});
  EXPECT_EQ(*n.precision, 0.0);
  EXPECT_FALSE(n.recall);
  const auto z = metrics_from_confusion({0, 1, 1, 1});
  EXPECT_EQ(*z.precision, 0.0);
  EXPECT_EQ(*z.recall, 0.0);
  EXPECT_FALSE(z.f1);
  EXPECT_THROW(metrics_from_confusion({}), Error);
}

TEST(Metrics, AggregateIsPopulationStd) {
  const auto a = aggregate({1.0, 2.0, std::nullopt, 3.0, 4.0});
  EXPECT_EQ(a.defined, 4u);
  EXPECT_DOUBLE_EQ(*a.mean, 2.5);
  EXPECT_DOUBLE_EQ(*a.stddev, std::sqrt(1.25));
  const auto one = aggregate({0.7});
  EXPECT_EQ(*one.stddev, 0.0);
  EXPECT_FALSE(aggregate({std::nullopt}).mean);
}

TEST(Evaluate, ThresholdAndCounts) {
  const std::vector<float> p = {0.9f, 0.2f, 0.5f, 0.4f}, y = {1, 0, 0, 1};
  const auto e = evaluate_probabilities(p, y, 0.5);
  EXPECT_EQ(e.confusion.tp, 1u);
  EXPECT_EQ(e.confusion.fp, 1u);
  EXPECT_EQ(e.confusion.tn, 1u);
  EXPECT_EQ(e.confusion.fn, 1u);
  const auto all = evaluate_probabilities(p, y, 0.0);
  EXPECT_EQ(all.confusion.fp, 2u);
  EXPECT_EQ(all.confusion.tn, 0u);
  EXPECT_THROW(evaluate_probabilities({}, {}, 0.5), Error);
}

TEST(Evaluate, RandomProbabilitiesNearChance) {
  std::vector<float> y(50);
  for (std::size_t i = 0; i < 50; ++i) y[i] = float(i % 2);
  double mean = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::vector<float> p(50);
    for (auto& x : p) x = float(rng.uniform());
    mean += evaluate_probabilities(p, y, 0.5).metrics.accuracy / 20.0;
  }
  EXPECT_NEAR(mean, 0.5, 0.15);
}

TEST(Evaluate, ForcedPositiveModelHasFullRecall) {
  auto m = toy_model();
  Rng rng(1);
  m.init(rng);
  force_constant(m, 30.0f);
  std::vector<signal::Volume> defects;
  for (int i = 0; i < 4; ++i) defects.push_back(testing::toy_volume(true, 8, 8, 128, rng));
  const auto e = evaluate(m, TestSet(std::move(defects)));
  EXPECT_EQ(*e.metrics.recall, 1.0);
  EXPECT_THROW(evaluate(m, TestSet{}), Error);
}

TEST(Evaluate, ConstantHalfModelLossIsLn2) {
  auto m = toy_model();
  Rng rng(2);
  m.init(rng);
  force_constant(m, 0.0f);
  const auto d = toy_data(3);
  EXPECT_NEAR(mean_loss(m, d.val), std::numbers::ln2, 1e-6);
}

TEST(Checkpoint, RoundTripAndRestore) {
  auto m = toy_model();
  Rng rng(4);
  m.init(rng);
  const auto bytes = encode_checkpoint(capture(m));
  EXPECT_EQ(std::memcmp(bytes.data(), "UTCK", 4), 0);
  const auto c = decode_checkpoint(bytes);
  EXPECT_EQ(encode_checkpoint(c), bytes);
  auto fresh = model_from_descriptor(c.descriptor);
  restore(fresh, c);
  EXPECT_EQ(encode_checkpoint(capture(fresh)), bytes);
  Rng r2(5);
  const auto x = to_batch(toy_volumes(3, 8, 8, 128, r2));
  const auto a = m.forward(x, num::Mode::infer), b = fresh.forward(x, num::Mode::infer);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.values()[i], b.values()[i]);
}

TEST(Checkpoint, StructuredErrors) {
  auto m = toy_model();
  const auto bytes = encode_checkpoint(capture(m));
  auto code = [](std::vector<std::uint8_t> b) {
    try {
      decode_checkpoint(b);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::state_error;
  };
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(code(bad), ErrorCode::bad_magic);
  auto version = bytes;
  version[4] = 9;
  EXPECT_EQ(code(version), ErrorCode::unsupported_version);
  auto cut = bytes;
  cut.resize(cut.size() - 3);
  EXPECT_EQ(code(cut), ErrorCode::truncated);
  auto hash = bytes;
  hash[8] ^= 1;
  EXPECT_EQ(code(hash), ErrorCode::parse_error);
  auto extra = bytes;
  extra.push_back(0);
  EXPECT_EQ(code(extra), ErrorCode::parse_error);

  auto other = model::build(model::default_spec(model::Family::reduction, model::Downsample::conv, kToy));
  try {
    restore(other, decode_checkpoint(bytes));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::config_mismatch);
  }
}

TEST(Checkpoint, NasDescriptorRebuilds) {
  Rng rng(6);
  nas::NasSpec spec;
  spec.item_shape = kToy;
  auto m = nas::instantiate(nas::sample_genome(rng), spec);
  auto back = model_from_descriptor(m.descriptor());
  EXPECT_EQ(back.descriptor(), m.descriptor());
  EXPECT_EQ(back.param_count(), m.param_count());
}

TEST(Train, ZeroBatchesKeepsInitialParameters) {
  auto m = toy_model();
  Rng rng(7);
  m.init(rng);
  const auto before = snapshot(m);
  const auto d = toy_data(8);
  TrainConfig cfg;
  cfg.max_batches = 0;
  const auto r = train_one(m, d.train, d.val, cfg);
  EXPECT_TRUE(r.trace.empty());
  EXPECT_FALSE(r.best);
  EXPECT_EQ(snapshot(m), before);
}

TEST(Train, SeparableToyReachesLowValidationLoss) {
  auto m = toy_model();
  Rng rng(9);
  m.init(rng);
  const auto d = toy_data(10);
  TrainConfig cfg;
  cfg.max_batches = 120;
  cfg.augment.enabled = false;
  cfg.seed = 11;
  const auto r = train_one(m, d.train, d.val, cfg);
  ASSERT_EQ(r.trace.size(), 12u);
  EXPECT_LT(r.best_val_loss, 0.1);
  // The model holds the argmin snapshot and reproduces its loss.
  std::size_t arg = 0;
  for (std::size_t i = 1; i < r.trace.size(); ++i)
    if (r.trace[i].val_loss < r.trace[arg].val_loss) arg = i;
  EXPECT_EQ(*r.best, arg);
  EXPECT_EQ(r.best_batch, r.trace[arg].batch);
  EXPECT_NEAR(mean_loss(m, d.val), r.best_val_loss, 1e-6);
  EXPECT_EQ(evaluate(m, d.test).metrics.accuracy, 1.0);
}

TEST(Train, SameSeedGivesIdenticalCheckpoints) {
  const auto d = toy_data(12);
  for (bool augment : {false, true}) {
    std::vector<std::uint8_t> bytes[2];
    for (auto& b : bytes) {
      auto m = toy_model();
      Rng rng(13);
      m.init(rng);
      TrainConfig cfg;
      cfg.max_batches = 20;
      cfg.augment.enabled = augment;
      cfg.seed = 14;
      train_one(m, d.train, d.val, cfg);
      b = encode_checkpoint(capture(m));
    }
    EXPECT_EQ(bytes[0], bytes[1]) << augment;
  }
}

TEST(Train, NonFiniteLossAborts) {
  auto d = toy_data(15);
  auto vols = d.train.volumes();
  for (auto& v : vols) v.data()[5] = std::nan("");
  const TrainSet poisoned(std::move(vols));
  auto m = toy_model();
  Rng rng(16);
  m.init(rng);
  TrainConfig cfg;
  cfg.max_batches = 5;
  try {
    train_one(m, poisoned, d.val, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::numerical);
    EXPECT_NE(std::string(e.what()).find("batch 1"), std::string::npos);
  }
}

TEST(Train, RejectsMismatchedInput) {
  auto m = model::build(model::default_spec(model::Family::reduction, model::Downsample::maxpool, {1, 8, 8, 256}));
  const auto d = toy_data(17);
  EXPECT_THROW(train_one(m, d.train, d.val, TrainConfig{}), Error);
}

TEST(RepeatRuns, SummaryMatchesRecomputation) {
  const auto d = toy_data(18);
  TrainConfig cfg;
  cfg.max_batches = 20;
  cfg.seed = 19;
  std::size_t hooks = 0;
  auto report = repeat_runs(toy_model, d.train, d.val, d.test, cfg, 3,
                            [&](std::size_t, model::Model&, const TrainResult&) { ++hooks; });
  EXPECT_EQ(hooks, 3u);
  ASSERT_EQ(report.runs.size(), 3u);
  EXPECT_NE(report.runs[0].seed, report.runs[1].seed);
  const auto s = summarize(report);
  double mean = 0;
  for (const auto& r : report.runs) mean += r.metrics.accuracy / 3.0;
  double var = 0;
  for (const auto& r : report.runs) var += (r.metrics.accuracy - mean) * (r.metrics.accuracy - mean) / 3.0;
  EXPECT_NEAR(*s.accuracy.mean, mean, 1e-12);
  EXPECT_NEAR(*s.accuracy.stddev, std::sqrt(var), 1e-12);

  report.model = "toy";
  const auto text = format_report(report);
  const auto back = parse_report(text);
  EXPECT_EQ(format_report(back), text);
  EXPECT_NE(format_table({back}).find("toy"), std::string::npos);
}

TEST(RepeatRuns, SingleRunHasZeroStd) {
  const auto d = toy_data(20);
  TrainConfig cfg;
  cfg.max_batches = 10;
  const auto s = summarize(repeat_runs(toy_model, d.train, d.val, d.test, cfg, 1));
  EXPECT_EQ(*s.accuracy.stddev, 0.0);
}

TEST(RepeatRuns, AbortedRunsNeedExplicitExclusion) {
  RunReport r;
  r.runs.push_back({0, 1, false, "", 10, 0.1, {5, 5, 0, 0}, metrics_from_confusion({5, 5, 0, 0})});
  RunRecord bad;
  bad.run = 1;
  bad.aborted = true;
  bad.message = "train: non-finite loss";
  r.runs.push_back(bad);
  EXPECT_THROW(summarize(r), Error);
  r.exclude_aborted = true;
  const auto s = summarize(r);
  EXPECT_EQ(s.included, 1u);
  EXPECT_EQ(s.aborted, 1u);
  EXPECT_EQ(*s.accuracy.mean, 1.0);
  const auto back = parse_report(format_report(r));
  EXPECT_TRUE(back.runs[1].aborted);
  EXPECT_EQ(back.runs[1].message, bad.message);
}

TEST(Data, TypedSplitsAndAccessLog) {
  const auto dir = testing::scratch_dir("harness_data");
  testing::write_toy_dataset(dir, 6, 4, 2, 4, 4, 16, 21);
  const DatasetDir ds(dir);
  EXPECT_EQ(ds.count(Split::train), 6u);
  AccessLog log;
  const auto train = ds.load<Split::train>(log);
  const auto val = ds.load<Split::validation>(log);
  EXPECT_EQ(train.size(), 6u);
  EXPECT_EQ(val.size(), 4u);
  EXPECT_EQ(train.item_shape(), (model::Shape{1, 4, 4, 16}));
  EXPECT_EQ(log.reads(Split::test), 0u);
  const auto test = ds.load<Split::test>(log);
  EXPECT_EQ(log.reads(Split::test), 1u);
  EXPECT_EQ(log.format(), "train\t6\nvalidation\t4\ntest\t2\n");
  const auto batch = to_batch(train.volumes());
  EXPECT_EQ(batch.shape(), (model::Shape{6, 1, 4, 4, 16}));
  EXPECT_EQ(batch.values()[16], 1.0f);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace utnas::harness

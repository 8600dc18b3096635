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
#include <filesystem>
#include <map>
#include <set>

#include "toy.hpp"
#include "utnas/common/error.hpp"
#include "utnas/harness/io.hpp"
#include "utnas/nas/search.hpp"

namespace utnas::nas {
namespace {

const model::Shape kSmall = {1, 16, 16, 128};

// Probability of every ordered partition of n blocks, by walking the binary
// tree of "new group / same group" decisions.
std::map<std::vector<std::size_t>, double> enumerate_partitions(std::size_t n) {
  std::map<std::vector<std::size_t>, double> out;
  for (std::size_t mask = 0; mask < (1u << (n - 1)); ++mask) {
    std::vector<std::size_t> sizes = {1};
    double p = 1.0;
    for (std::size_t i = 1; i < n; ++i) {
      const double pn = 1.0 / double(sizes.back() + 1);
      if (mask >> (i - 1) & 1) {
        p *= pn;
        sizes.push_back(1);
      } else {
        p *= 1.0 - pn;
        ++sizes.back();
      }
    }
    out[sizes] += p;
  }
  return out;
}

harness::TrainSet toy_train(std::uint64_t seed, std::size_t n, std::size_t t = 64) {
  Rng rng(seed);
  return harness::TrainSet(testing::toy_volumes(n, 8, 8, t, rng));
}

harness::ValidationSet toy_val(std::uint64_t seed, std::size_t n, std::size_t t = 64) {
  Rng rng(seed);
  return harness::ValidationSet(testing::toy_volumes(n, 8, 8, t, rng));
}

SearchConfig small_search(std::size_t iterations, std::size_t retrains, std::size_t batches) {
  SearchConfig c;
  c.iterations = iterations;
  c.retrains = retrains;
  c.train.max_batches = batches;
  c.train.augment.enabled = false;
  c.seed = 42;
  return c;
}

TEST(Ops, SeventySevenLegalOps) {
  const auto& ops = legal_ops();
  EXPECT_EQ(ops.size(), 77u);
  std::set<std::string> tokens;
  for (const auto& op : ops) {
    const auto t = format_op(op);
    tokens.insert(t);
    EXPECT_EQ(parse_op(t), op) << t;
  }
  EXPECT_EQ(tokens.size(), 77u);
  EXPECT_TRUE(tokens.count("dw7d4+bn+gelu"));
  EXPECT_TRUE(tokens.count("mp3"));
  EXPECT_TRUE(tokens.count("skip"));
}

TEST(Ops, MalformedTokensRejected) {
  for (const char* t : {"dw4d1", "dw3d5", "dw3", "ap4", "mp9+bn", "pw+gelu+bn", "skip+bn", "conv3", "dw3d1+relu", ""}) {
    try {
      parse_op(t);
      ADD_FAILURE() << t;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::parse_error) << t;
    }
  }
}

TEST(Genome, NewGroupProbability) {
  EXPECT_DOUBLE_EQ(new_group_probability(1), 0.5);
  EXPECT_DOUBLE_EQ(new_group_probability(2), 1.0 / 3);
  EXPECT_DOUBLE_EQ(new_group_probability(3), 0.25);
}

TEST(Genome, EnumeratedPartitionsOfFourBlocks) {
  const auto p = enumerate_partitions(4);
  EXPECT_NEAR(p.at({4}), 0.25, 1e-15);
  EXPECT_NEAR(p.at({1, 1, 1, 1}), 0.125, 1e-15);
  EXPECT_NEAR(p.at({1, 3}), 1.0 / 6, 1e-15);
  double total = 0;
  for (const auto& [k, v] : p) total += v;
  EXPECT_NEAR(total, 1.0, 1e-15);
}

TEST(Genome, SampledPartitionsMatchEnumeration) {
  const auto want = enumerate_partitions(4);
  std::map<std::vector<std::size_t>, double> got;
  std::size_t n4 = 0, counts[5] = {};
  Rng rng(1);
  while (n4 < 100000) {
    const auto g = sample_genome(rng);
    ++counts[g.blocks.size()];
    if (g.blocks.size() != 4) continue;
    ++n4;
    got[g.group_sizes()] += 1.0;
  }
  for (const auto& [k, v] : want) EXPECT_NEAR(got[k] / double(n4), v, 0.01);
  for (std::size_t n : {2, 3, 4}) EXPECT_NEAR(double(counts[n]) / double(counts[2] + counts[3] + counts[4]), 1.0 / 3, 0.01);
}

TEST(Genome, RoundTrip) {
  Genome g;
  g.blocks = {{0, parse_op("dw3d1"), parse_op("skip")}, {1, parse_op("pw+bn"), parse_op("mp5+gelu")}};
  const auto text = serialize_genome(g);
  EXPECT_EQ(text, "genome v1 blocks=2\nblock group=0 op1=dw3d1 op2=skip\nblock group=1 op1=pw+bn op2=mp5+gelu\n");
  EXPECT_EQ(parse_genome(text), g);
}

TEST(Genome, EveryOpRoundTripsInsideAGenome) {
  const auto& ops = legal_ops();
  for (std::size_t i = 0; i < ops.size(); i += 2) {
    Genome g;
    g.blocks = {{0, ops[i], ops[(i + 1) % ops.size()]}, {0, ops[(i + 2) % ops.size()], ops[(i + 3) % ops.size()]}};
    EXPECT_EQ(parse_genome(serialize_genome(g)), g);
  }
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const auto g = sample_genome(rng);
    EXPECT_EQ(parse_genome(serialize_genome(g)), g);
  }
}

TEST(Genome, ParseErrorsCarryLineNumbers) {
  const std::string bad = "genome v1 blocks=2\nblock group=0 op1=dw3d1 op2=skip\nblock group=0 op1=dw4 op2=skip\n";
  try {
    parse_genome(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::parse_error);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_genome("genome v1 blocks=1\nblock group=0 op1=skip op2=skip\n"), Error);
  EXPECT_THROW(parse_genome("genome v1 blocks=3\nblock group=0 op1=skip op2=skip\nblock group=0 op1=skip op2=skip\n"), Error);
  EXPECT_THROW(parse_genome("genome v1 blocks=2\nblock group=0 op1=skip op2=skip\nblock group=2 op1=skip op2=skip\n"), Error);
  EXPECT_THROW(parse_genome("genome v2 blocks=2\n"), Error);
}

TEST(Instantiate, StemShapeAtFullScale) {
  Genome g;
  g.blocks = {{0, parse_op("skip"), parse_op("skip")}, {1, parse_op("skip"), parse_op("skip")}};
  const auto m = instantiate(g);
  const auto t = m.trace(1);
  bool found = false;
  for (const auto& [name, shape] : t)
    if (name.rfind("0 3 ", 0) == 0) {
      EXPECT_EQ(shape, (model::Shape{1, 64, 16, 16, 128}));
      found = true;
    }
  EXPECT_TRUE(found);
  EXPECT_EQ(t.back().second, (model::Shape{1, 1}));
}

TEST(Instantiate, DeepGenomeClampsDownsampling) {
  Genome g;
  for (std::size_t i = 0; i < 4; ++i) g.blocks.push_back({i, parse_op("dw7d4+bn"), parse_op("ap7")});
  const auto m = instantiate(g);
  // 16,16,128 -> 8,8,32 -> 4,4,8 -> 2,2,2 -> 1,1,1 (time window clamped to 2)
  model::Shape last;
  for (const auto& [name, shape] : m.trace(1))
    if (shape.size() == 5) last = shape;
  EXPECT_EQ(last, (model::Shape{1, 64, 1, 1, 1}));
}

TEST(Instantiate, TooSmallInputIsRejected) {
  Genome g;
  g.blocks = {{0, parse_op("skip"), parse_op("skip")}, {0, parse_op("skip"), parse_op("skip")}};
  NasSpec spec;
  spec.item_shape = {1, 2, 2, 4};
  try {
    instantiate(g, spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::shape_mismatch);
  }
}

TEST(Instantiate, AllSkipGenomeGivesProbability) {
  Genome g;
  g.blocks = {{0, parse_op("skip"), parse_op("skip")}, {0, parse_op("skip"), parse_op("skip")}};
  NasSpec spec;
  spec.item_shape = kSmall;
  auto m = instantiate(g, spec);
  Rng rng(3);
  m.init(rng);
  std::vector<float> x(2 * num::numel(kSmall));
  for (auto& v : x) v = float(rng.uniform());
  const auto y = m.forward(model::Tensor::from({2, 1, 16, 16, 128}, x), num::Mode::infer);
  for (float p : y.values()) {
    EXPECT_GT(p, 0.0f);
    EXPECT_LT(p, 1.0f);
  }
}

TEST(Instantiate, SampledGenomesTrainEveryParameter) {
  Rng rng(4);
  NasSpec spec;
  spec.item_shape = kSmall;
  std::vector<float> x(2 * num::numel(kSmall));
  for (auto& v : x) v = float(rng.uniform());
  const float labels[2] = {0.0f, 1.0f};
  for (int i = 0; i < 100; ++i) {
    const auto g = sample_genome(rng);
    auto m = instantiate(g, spec);
    m.init(rng);
    const auto y = m.forward(model::Tensor::from({2, 1, 16, 16, 128}, x), num::Mode::train, &rng);
    ASSERT_EQ(y.shape(), (model::Shape{2, 1}));
    num::backward(num::bce_loss(y, std::span<const float>(labels)));
    for (const auto& p : m.parameters()) {
      if (!p.trainable) continue;
      ASSERT_TRUE(p.tensor->has_grad()) << serialize_genome(g) << p.name;
      double norm = 0;
      for (float v : p.tensor->grad()) {
        ASSERT_TRUE(std::isfinite(v));
        norm += double(v) * double(v);
      }
      EXPECT_GT(norm, 0.0) << serialize_genome(g) << p.name;
    }
  }
}

TEST(Evaluate, RetrainOnceIsReproducible) {
  const auto train = toy_train(5, 16);
  const auto val = toy_val(6, 8);
  auto cfg = small_search(1, 1, 10);
  Rng rng(7);
  const auto g = sample_genome(rng);
  const auto a = evaluate_candidate(g, train, val, cfg, 99);
  const auto b = evaluate_candidate(g, train, val, cfg, 99);
  ASSERT_EQ(a.run_losses.size(), 1u);
  EXPECT_EQ(a.mean_val_loss, b.mean_val_loss);
  EXPECT_EQ(a.run_losses, b.run_losses);
}

TEST(Evaluate, ToySeparableSearchFindsLowLoss) {
  const auto train = toy_train(8, 32);
  const auto val = toy_val(9, 16);
  auto cfg = small_search(1, 1, 60);
  double best = 1e9;
  for (std::uint64_t i = 0; i < 5; ++i) {
    const auto r = evaluate_candidate(genome_for_iteration(10, i), train, val, cfg, i);
    best = std::min(best, r.mean_val_loss);
  }
  EXPECT_LT(best, 0.1);
}

TEST(Search, LeaderboardFormat) {
  const std::vector<LeaderboardEntry> e = {{0, 0.5, "genomes/iter_000.genome"},
                                           {1, 0.25, "genomes/iter_001.genome"},
                                           {2, INFINITY, "genomes/iter_002.genome"},
                                           {3, 0.25, "genomes/iter_003.genome"}};
  const auto text = format_leaderboard(e);
  EXPECT_EQ(text,
            "1\t0.25\tgenomes/iter_001.genome\n3\t0.25\tgenomes/iter_003.genome\n0\t0.5\tgenomes/iter_000.genome\n"
            "2\tinf\tgenomes/iter_002.genome\n");
  EXPECT_EQ(format_leaderboard(parse_leaderboard(text)), text);
  EXPECT_THROW(parse_leaderboard("1\tx\tf\n"), Error);
}

TEST(Search, SingleIteration) {
  const auto dir = testing::scratch_dir("nas_single");
  std::filesystem::remove_all(dir);
  const auto board = random_search(small_search(1, 1, 10), toy_train(11, 16), toy_val(12, 8), dir);
  ASSERT_EQ(board.size(), 1u);
  EXPECT_TRUE(std::filesystem::exists(dir / board[0].genome_file));
  std::filesystem::remove_all(dir);
}

TEST(Search, ResumeMatchesUninterruptedRun) {
  const auto train = toy_train(13, 16);
  const auto val = toy_val(14, 8);
  const auto cfg = small_search(4, 2, 10);
  const auto a = testing::scratch_dir("nas_full"), b = testing::scratch_dir("nas_resumed");
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
  const auto full = random_search(cfg, train, val, a);
  ASSERT_EQ(full.size(), 4u);
  for (std::size_t i = 1; i < full.size(); ++i) EXPECT_LE(full[i - 1].mean_val_loss, full[i].mean_val_loss);

  const auto partial = random_search(cfg, train, val, b, 2);
  EXPECT_EQ(partial.size(), 2u);
  const auto resumed = random_search(cfg, train, val, b);
  EXPECT_EQ(resumed.size(), 4u);
  EXPECT_EQ(harness::read_text(a / kLeaderboardName), harness::read_text(b / kLeaderboardName));
  for (const auto& e : full)
    EXPECT_EQ(harness::read_text(a / e.genome_file), harness::read_text(b / e.genome_file));

  auto other = cfg;
  other.retrains = 3;
  try {
    random_search(other, train, val, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::config_mismatch);
  }
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}

}  // namespace
}  // namespace utnas::nas

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
#include "utnas/nas/search.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "utnas/common/error.hpp"
#include "utnas/harness/io.hpp"
#include "utnas/model/architectures.hpp"

namespace utnas::nas {

namespace {

enum Stream : std::uint64_t { kGenome = 1, kEvaluate };

std::string fmt_loss(double v) {
  if (std::isinf(v)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string iteration_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "iter_%03zu", i);
  return buf;
}

}  // namespace

void SearchConfig::validate() const {
  require(iterations >= 1, ErrorCode::invalid_argument, "search: iterations must be >= 1");
  require(retrains >= 1, ErrorCode::invalid_argument, "search: retrains must be >= 1");
  train.validate();
}

std::string format_search_config(const SearchConfig& c) {
  std::ostringstream os;
  os << "seed = " << c.seed << "\niterations = " << c.iterations << "\nretrains = " << c.retrains
     << "\nbatch_size = " << c.train.batch_size << "\neval_interval = " << c.train.eval_interval
     << "\nmax_batches = " << c.train.max_batches << "\nlr = " << fmt_loss(c.train.adam.lr)
     << "\naugment = " << (c.train.augment.enabled ? "on" : "off")
     << "\ninput = " << model::format_extents(c.spec.item_shape) << "\nchannels = " << c.spec.channels
     << "\nbottleneck = " << c.spec.bottleneck << "\n";
  return os.str();
}

CandidateResult evaluate_candidate(const Genome& g, const harness::TrainSet& train,
                                   const harness::ValidationSet& val, const SearchConfig& cfg,
                                   std::uint64_t seed) {
  cfg.validate();
  auto spec = cfg.spec;
  spec.item_shape = train.item_shape();
  CandidateResult result;
  double sum = 0;
  for (std::size_t r = 0; r < cfg.retrains; ++r) {
    const auto rs = harness::run_seed(seed, r);
    auto m = instantiate(g, spec);
    Rng init(harness::init_seed(rs));
    m.init(init);
    auto tc = cfg.train;
    tc.seed = rs;
    double loss = std::numeric_limits<double>::infinity();
    try {
      loss = harness::train_one(m, train, val, tc).best_val_loss;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::numerical) throw;
    }
    result.run_losses.push_back(loss);
    sum += loss;
  }
  result.mean_val_loss = sum / double(cfg.retrains);
  return result;
}

std::string format_leaderboard(const std::vector<LeaderboardEntry>& entries) {
  auto sorted = entries;
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.mean_val_loss != b.mean_val_loss ? a.mean_val_loss < b.mean_val_loss : a.iteration < b.iteration;
  });
  std::string out;
  for (const auto& e : sorted)
    out += std::to_string(e.iteration) + "\t" + fmt_loss(e.mean_val_loss) + "\t" + e.genome_file + "\n";
  return out;
}

std::vector<LeaderboardEntry> parse_leaderboard(std::string_view text) {
  std::vector<LeaderboardEntry> out;
  std::istringstream is{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    require(t2 != std::string::npos && line.find('\t', t2 + 1) == std::string::npos, ErrorCode::parse_error,
            "leaderboard line " + std::to_string(line_no) + ": expected 3 fields");
    LeaderboardEntry e;
    try {
      std::size_t pos = 0;
      e.iteration = std::stoul(line.substr(0, t1), &pos);
      require(pos == t1, ErrorCode::parse_error, "bad iteration");
      const auto loss = line.substr(t1 + 1, t2 - t1 - 1);
      e.mean_val_loss = loss == "inf" ? std::numeric_limits<double>::infinity() : std::stod(loss, &pos);
      require(loss == "inf" || pos == loss.size(), ErrorCode::parse_error, "bad loss");
    } catch (const std::exception&) {
      fail(ErrorCode::parse_error, "leaderboard line " + std::to_string(line_no) + ": bad number");
    }
    e.genome_file = line.substr(t2 + 1);
    out.push_back(std::move(e));
  }
  return out;
}

Genome genome_for_iteration(std::uint64_t seed, std::size_t iteration) {
  Rng rng(derive_seed(seed, {kGenome, iteration}));
  return sample_genome(rng);
}

std::vector<LeaderboardEntry> random_search(const SearchConfig& cfg_in, const harness::TrainSet& train,
                                            const harness::ValidationSet& val, const std::filesystem::path& dir,
                                            std::optional<std::size_t> stop_after) {
  auto cfg = cfg_in;
  cfg.spec.item_shape = train.item_shape();
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(dir / "genomes");
  const auto config_text = format_search_config(cfg);
  const auto config_path = dir / kSearchConfigName;
  std::vector<LeaderboardEntry> board;
  if (fs::exists(config_path)) {
    require(harness::read_text(config_path) == config_text, ErrorCode::config_mismatch,
            "search: " + config_path.string() + " was written with different settings");
    if (fs::exists(dir / kLeaderboardName)) board = parse_leaderboard(harness::read_text(dir / kLeaderboardName));
  } else {
    require(!fs::exists(dir / kLeaderboardName), ErrorCode::config_mismatch,
            "search: leaderboard without a config in " + dir.string());
    harness::write_text(config_path, config_text);
  }

  std::vector<bool> done(cfg.iterations, false);
  for (const auto& e : board) {
    require(e.iteration < cfg.iterations && !done[e.iteration], ErrorCode::parse_error,
            "search: leaderboard has an unexpected iteration " + std::to_string(e.iteration));
    done[e.iteration] = true;
  }

  std::size_t evaluated = 0;
  for (std::size_t i = 0; i < cfg.iterations; ++i) {
    if (done[i]) continue;
    if (stop_after && evaluated == *stop_after) break;
    const auto g = genome_for_iteration(cfg.seed, i);
    const auto name = iteration_name(i);
    harness::write_text(dir / "genomes" / (name + ".genome"), serialize_genome(g));
    const auto r = evaluate_candidate(g, train, val, cfg, derive_seed(cfg.seed, {kEvaluate, i}));
    std::string runs;
    for (std::size_t k = 0; k < r.run_losses.size(); ++k)
      runs += std::to_string(k) + "\t" + fmt_loss(r.run_losses[k]) + "\n";
    harness::write_text(dir / "genomes" / (name + ".runs"), runs);
    board.push_back({i, r.mean_val_loss, "genomes/" + name + ".genome"});
    harness::write_text(dir / kLeaderboardName, format_leaderboard(board));
    ++evaluated;
  }
  return parse_leaderboard(format_leaderboard(board));
}

}  // namespace utnas::nas

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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "utnas/harness/train.hpp"
#include "utnas/nas/genome.hpp"

namespace utnas::nas {

struct SearchConfig {
  std::size_t iterations = 80;
  std::size_t retrains = 3;
  harness::TrainConfig train;  // eval_interval 10
  NasSpec spec;                // item_shape follows the data
  std::uint64_t seed = 0;

  void validate() const;
};

// Text form used to detect a resume with different settings.
std::string format_search_config(const SearchConfig& cfg);

struct CandidateResult {
  double mean_val_loss = 0;
  std::vector<double> run_losses;  // +inf for a diverged run
};

// Best validation loss of `retrains` fresh initializations, averaged.
CandidateResult evaluate_candidate(const Genome& g, const harness::TrainSet& train,
                                   const harness::ValidationSet& val, const SearchConfig& cfg,
                                   std::uint64_t seed);

struct LeaderboardEntry {
  std::size_t iteration = 0;
  double mean_val_loss = 0;
  std::string genome_file;  // relative to the search directory
};

// "<iteration>\t<mean_val_loss>\t<genome-file>" per line, sorted by loss then
// iteration.
std::string format_leaderboard(const std::vector<LeaderboardEntry>& entries);
std::vector<LeaderboardEntry> parse_leaderboard(std::string_view text);

inline constexpr const char* kLeaderboardName = "leaderboard.tsv";
inline constexpr const char* kSearchConfigName = "search_config.txt";

// Samples and evaluates cfg.iterations genomes, rewriting the leaderboard in
// `dir` after each one. Iterations already on the leaderboard are skipped, so
// an interrupted search resumes where it stopped; a directory written with a
// different config is rejected. `stop_after` ends the call after that many new
// evaluations. Only train and validation splits are accepted.
std::vector<LeaderboardEntry> random_search(const SearchConfig& cfg, const harness::TrainSet& train,
                                            const harness::ValidationSet& val,
                                            const std::filesystem::path& dir,
                                            std::optional<std::size_t> stop_after = std::nullopt);

// Genome and seeds of iteration i depend only on (seed, i).
Genome genome_for_iteration(std::uint64_t seed, std::size_t iteration);

}  // namespace utnas::nas

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
// utnas command line: synth, train, search, eval, report.
//
// Failures print one line to stderr and exit nonzero:
//   error code=<code> message="<text>"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "utnas/common/error.hpp"
#include "utnas/harness/checkpoint.hpp"
#include "utnas/harness/data.hpp"
#include "utnas/harness/io.hpp"
#include "utnas/harness/train.hpp"
#include "utnas/model/architectures.hpp"
#include "utnas/nas/search.hpp"
#include "utnas/phantom/dataset.hpp"

namespace fs = std::filesystem;
using namespace utnas;

namespace {

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

int report_error(std::string_view code, const std::string& message) {
  std::cerr << "error code=" << code << " message=" << quote(message) << "\n";
  return 1;
}

struct SynthArgs {
  fs::path out, config;
  std::uint64_t seed = 0;
  std::optional<std::size_t> n_noise;
  bool overwrite = false;
};

struct TrainArgs {
  std::string arch = "reduction", pool = "conv", augment = "on";
  fs::path genome, data, out;
  std::size_t runs = 1, batches = 1000, eval_interval = 10;
  std::uint64_t seed = 0;
  double lr = 1e-3, scale_lo = 0.8, scale_hi = 1.2, threshold = 0.5;
  int max_dilation = 15;
  bool exclude_aborted = false, summary = false;
};

struct SearchArgs {
  std::size_t iters = 80, retrain = 3, batches = 1000;
  std::optional<std::size_t> stop_after;
  fs::path data, out;
  std::uint64_t seed = 0;
};

struct EvalArgs {
  fs::path model, data;
  double threshold = 0.5;
};

struct ReportArgs {
  fs::path out;
};

void run_synth(const SynthArgs& a) {
  auto cfg = phantom::parse_synth_config(harness::read_text(a.config));
  if (a.n_noise) cfg.n_noise = *a.n_noise;
  const auto s = phantom::build_dataset(cfg, a.out, a.seed, a.overwrite);
  std::printf("defect\t%zu\ndefect_free\t%zu\ntrain\t%zu\nvalidation\t%zu\ntest\t%zu\n", s.defect,
              s.defect_free, s.train, s.validation, s.test);
}

void run_train(const TrainArgs& a) {
  harness::TrainConfig cfg;
  cfg.max_batches = a.batches;
  cfg.eval_interval = a.eval_interval;
  cfg.adam.lr = a.lr;
  cfg.seed = a.seed;
  cfg.augment.enabled = a.augment == "on";
  cfg.augment.scale_lo = a.scale_lo;
  cfg.augment.scale_hi = a.scale_hi;
  require(a.max_dilation >= 0, ErrorCode::invalid_argument, "--max-dilation must be >= 0");
  cfg.augment.max_dilation = static_cast<std::size_t>(a.max_dilation);
  cfg.validate();

  const harness::DatasetDir dir(a.data);
  harness::AccessLog log;
  const auto train = dir.load<harness::Split::train>(log);
  const auto val = dir.load<harness::Split::validation>(log);

  harness::ModelFactory factory;
  std::string name;
  if (a.arch == "nas") {
    require(!a.genome.empty(), ErrorCode::invalid_argument, "--arch nas needs --genome FILE");
    nas::NasSpec spec;
    spec.item_shape = train.item_shape();
    const auto g = nas::parse_genome(harness::read_text(a.genome));
    factory = [g, spec] { return nas::instantiate(g, spec); };
    name = "nas";
  } else {
    const auto spec = model::default_spec(model::parse_family(a.arch), model::parse_downsample(a.pool),
                                          train.item_shape());
    factory = [spec] { return model::build(spec); };
    name = a.arch + "-" + std::string(model::to_string(spec.downsample));
  }
  if (a.summary) std::cout << factory().summary() << "\n";

  fs::create_directories(a.out);
  std::ostringstream args;
  args << "arch = " << a.arch << "\npool = " << a.pool << "\ngenome = " << a.genome.string()
       << "\naugment = " << a.augment << "\nscale_lo = " << a.scale_lo << "\nscale_hi = " << a.scale_hi
       << "\nmax_dilation = " << a.max_dilation << "\ndata = " << a.data.string() << "\nruns = " << a.runs
       << "\nbatches = " << a.batches << "\neval_interval = " << a.eval_interval << "\nlr = " << a.lr
       << "\nseed = " << a.seed << "\nthreshold = " << a.threshold << "\n";
  harness::write_text(a.out / "train_config.txt", args.str());

  std::optional<harness::TestSet> test;
  const auto on_run = [&](std::size_t r, model::Model& m, const harness::TrainResult& res) {
    const auto run_dir = a.out / ("run_" + std::to_string(r));
    fs::create_directories(run_dir);
    harness::save_checkpoint(m, run_dir / "model.utck");
    std::string trace = "batch\ttrain_loss\tval_loss\n";
    char line[96];
    for (const auto& p : res.trace) {
      std::snprintf(line, sizeof line, "%zu\t%.9g\t%.9g\n", p.batch, p.train_loss, p.val_loss);
      trace += line;
    }
    harness::write_text(run_dir / "trace.tsv", trace);
    std::fprintf(stderr, "run %zu best_batch=%zu best_val_loss=%.6g\n", r, res.best_batch, res.best_val_loss);
  };
  const auto load_test = [&]() -> const harness::TestSet& {
    test = dir.load<harness::Split::test>(log);
    return *test;
  };
  auto report = harness::repeat_runs(factory, train, val, load_test, cfg, a.runs, on_run, a.threshold);
  report.model = name;
  report.exclude_aborted = a.exclude_aborted;
  harness::write_text(a.out / "report.tsv", harness::format_report(report));
  harness::write_text(a.out / "access.log", log.format());
  std::cout << harness::format_table({report});
}

void run_search(const SearchArgs& a) {
  nas::SearchConfig cfg;
  cfg.iterations = a.iters;
  cfg.retrains = a.retrain;
  cfg.train.max_batches = a.batches;
  cfg.seed = a.seed;
  const harness::DatasetDir dir(a.data);
  harness::AccessLog log;
  const auto train = dir.load<harness::Split::train>(log);
  const auto val = dir.load<harness::Split::validation>(log);
  const auto board = nas::random_search(cfg, train, val, a.out, a.stop_after);
  harness::write_text(a.out / "access.log", log.format());
  std::cout << nas::format_leaderboard(board);
}

void run_eval(const EvalArgs& a) {
  const auto ck = harness::load_checkpoint(a.model);
  auto m = harness::model_from_descriptor(ck.descriptor);
  harness::restore(m, ck);
  const harness::DatasetDir dir(a.data);
  harness::AccessLog log;
  const auto test = dir.load<harness::Split::test>(log);
  const auto e = harness::evaluate(m, test, a.threshold);
  const auto& c = e.confusion;
  std::printf("tp\t%zu\ntn\t%zu\nfp\t%zu\nfn\t%zu\n", c.tp, c.tn, c.fp, c.fn);
  std::printf("accuracy\t%s\nprecision\t%s\nrecall\t%s\nf1\t%s\n",
              harness::format_metric(e.metrics.accuracy).c_str(),
              harness::format_metric(e.metrics.precision).c_str(),
              harness::format_metric(e.metrics.recall).c_str(), harness::format_metric(e.metrics.f1).c_str());
}

void run_report(const ReportArgs& a) {
  require(fs::is_directory(a.out), ErrorCode::io_error, "not a directory: " + a.out.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(a.out))
    if (e.is_regular_file() && e.path().filename() == "report.tsv") files.push_back(e.path());
  require(!files.empty(), ErrorCode::io_error, "no report.tsv under " + a.out.string());
  std::sort(files.begin(), files.end());
  std::vector<harness::RunReport> reports;
  for (const auto& f : files) reports.push_back(harness::parse_report(harness::read_text(f)));
  std::cout << harness::format_table(reports);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Volumetric ultrasonic defect classification"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--out", sa.out, "Output directory")->required();
  synth->add_option("--config", sa.config, "Phantom config file")->required()->check(CLI::ExistingFile);
  synth->add_option("--seed", sa.seed, "Seed")->required();
  synth->add_option("--n-noise", sa.n_noise, "Noise draws per simulation");
  synth->add_flag("--overwrite", sa.overwrite, "Replace an existing dataset");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train and evaluate repeated runs");
  train->add_option("--arch", ta.arch, "Architecture")->check(CLI::IsMember({"reduction", "constant", "nas"}));
  train->add_option("--pool", ta.pool, "Downsampling")->check(CLI::IsMember({"conv", "max"}));
  train->add_option("--genome", ta.genome, "Genome file for --arch nas")->check(CLI::ExistingFile);
  train->add_option("--augment", ta.augment, "Augmentation")->check(CLI::IsMember({"on", "off"}));
  train->add_option("--scale-lo", ta.scale_lo, "Lower scale factor");
  train->add_option("--scale-hi", ta.scale_hi, "Upper scale factor");
  train->add_option("--max-dilation", ta.max_dilation, "Maximum dilation in samples");
  train->add_option("--data", ta.data, "Dataset directory")->required();
  train->add_option("--runs", ta.runs, "Independent runs")->required();
  train->add_option("--out", ta.out, "Output directory")->required();
  train->add_option("--seed", ta.seed, "Seed")->required();
  train->add_option("--batches", ta.batches, "Batches per run");
  train->add_option("--eval-interval", ta.eval_interval, "Batches between validations");
  train->add_option("--lr", ta.lr, "Adam learning rate");
  train->add_option("--threshold", ta.threshold, "Defect probability threshold");
  train->add_flag("--exclude-aborted", ta.exclude_aborted, "Leave diverged runs out of the means");
  train->add_flag("--summary", ta.summary, "Print the model summary");

  SearchArgs sea;
  auto* search = app.add_subcommand("search", "Random architecture search");
  search->add_option("--iters", sea.iters, "Candidates")->required();
  search->add_option("--retrain", sea.retrain, "Trainings per candidate")->required();
  search->add_option("--data", sea.data, "Dataset directory")->required();
  search->add_option("--out", sea.out, "Search directory")->required();
  search->add_option("--seed", sea.seed, "Seed")->required();
  search->add_option("--batches", sea.batches, "Batches per training");
  search->add_option("--stop-after", sea.stop_after, "Stop after this many new candidates");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  eval->add_option("--model", ea.model, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", ea.data, "Dataset directory")->required();
  eval->add_option("--threshold", ea.threshold, "Defect probability threshold");

  ReportArgs ra;
  auto* report = app.add_subcommand("report", "Tabulate every report.tsv under a directory");
  report->add_option("--out", ra.out, "Directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what());
  }

  try {
    if (*synth) run_synth(sa);
    if (*train) run_train(ta);
    if (*search) run_search(sea);
    if (*eval) run_eval(ea);
    if (*report) run_report(ra);
  } catch (const Error& e) {
    return report_error(to_string(e.code()), e.what());
  } catch (const std::exception& e) {
    return report_error("internal", e.what());
  }
  return 0;
}

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
#include "utnas/harness/train.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "utnas/common/error.hpp"

namespace utnas::harness {

namespace {

enum Stream : std::uint64_t { kShuffle = 1, kAugment, kDropout, kInit, kRun };

std::vector<float> labels_of(const std::vector<signal::Volume>& v) {
  std::vector<float> out;
  for (const auto& x : v) out.push_back(x.label() == signal::Label::defect ? 1.0f : 0.0f);
  return out;
}

double bce(float p, float y) {
  const double q = std::clamp<double>(p, num::kBceClamp, 1.0 - num::kBceClamp);
  return y > 0.5f ? -std::log(q) : -std::log(1.0 - q);
}

std::string format_trace(const std::vector<EvalPoint>& trace) {
  std::string s;
  for (const auto& p : trace) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "\n  batch %zu train %.6g val %.6g", p.batch, p.train_loss, p.val_loss);
    s += buf;
  }
  return s;
}

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '\n') out += "\\n";
    else if (c == '\t') out += "\\t";
    else if (c == '\\') out += "\\\\";
    else out += c;
  }
  return out;
}

std::string unescape(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      const char n = s[++i];
      out += n == 'n' ? '\n' : n == 't' ? '\t' : n;
    } else {
      out += s[i];
    }
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  require(batch_size >= 1, ErrorCode::invalid_argument, "train: batch size must be >= 1");
  require(eval_interval >= 1, ErrorCode::invalid_argument, "train: eval interval must be >= 1");
  require(adam.lr > 0, ErrorCode::invalid_argument, "train: learning rate must be positive");
}

Snapshot snapshot(model::Model& m) {
  Snapshot s;
  for (const auto& p : m.parameters()) {
    const auto v = p.tensor->values();
    s.emplace_back(v.begin(), v.end());
  }
  return s;
}

void restore(model::Model& m, const Snapshot& s) {
  auto params = m.parameters();
  require(params.size() == s.size(), ErrorCode::state_error, "snapshot does not match the model");
  for (std::size_t i = 0; i < s.size(); ++i) {
    require(s[i].size() == params[i].tensor->size(), ErrorCode::state_error,
            "snapshot does not match parameter " + params[i].name);
    std::copy(s[i].begin(), s[i].end(), params[i].tensor->mutable_values().begin());
  }
}

std::vector<float> predict(model::Model& m, const std::vector<signal::Volume>& volumes,
                           std::size_t batch_size) {
  num::NoGradGuard guard;
  std::vector<float> out;
  out.reserve(volumes.size());
  std::vector<const signal::Volume*> ptrs;
  for (std::size_t i = 0; i < volumes.size(); i += batch_size) {
    ptrs.clear();
    for (std::size_t j = i; j < std::min(volumes.size(), i + batch_size); ++j) ptrs.push_back(&volumes[j]);
    const auto y = m.forward(to_batch(std::span<const signal::Volume* const>(ptrs)), num::Mode::infer);
    out.insert(out.end(), y.values().begin(), y.values().end());
  }
  return out;
}

template <Split S>
double mean_loss(model::Model& m, const SplitSet<S>& set, std::size_t batch_size) {
  require(!set.empty(), ErrorCode::invalid_argument, std::string(to_string(S)) + " split is empty");
  const auto p = predict(m, set.volumes(), batch_size);
  double total = 0;
  for (std::size_t i = 0; i < p.size(); ++i) total += bce(p[i], set.label(i));
  return total / double(p.size());
}

TrainResult train_one(model::Model& m, const TrainSet& train, const ValidationSet& val,
                      const TrainConfig& cfg) {
  cfg.validate();
  require(!train.empty() && !val.empty(), ErrorCode::invalid_argument, "train: empty train or validation split");
  require(train.item_shape() == m.item_shape() && val.item_shape() == m.item_shape(), ErrorCode::shape_mismatch,
          "train: data items " + num::to_string(train.item_shape()) + " do not match the model input " +
              num::to_string(m.item_shape()));
  auto aug = cfg.augment;
  aug.padded_length = train.item_shape()[3];

  TrainResult result;
  Snapshot best = snapshot(m);
  num::Adam<float> opt(m.trainable(), cfg.adam);
  const std::size_t n = train.size();
  const std::size_t bs = std::min(cfg.batch_size, n);
  const std::size_t per_epoch = n / bs;
  std::vector<std::size_t> order(n);
  double loss_sum = 0;
  std::size_t loss_count = 0;

  for (std::size_t batch = 0; batch < cfg.max_batches; ++batch) {
    const std::size_t epoch = batch / per_epoch, slot = batch % per_epoch;
    if (slot == 0) {
      std::iota(order.begin(), order.end(), 0);
      Rng shuffle(derive_seed(cfg.seed, {kShuffle, epoch}));
      for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_int(0, std::int64_t(i) - 1))]);
    }
    std::vector<signal::Volume> items;
    std::vector<float> labels;
    for (std::size_t j = 0; j < bs; ++j) {
      items.push_back(train[order[slot * bs + j]]);
      labels.push_back(train.label(order[slot * bs + j]));
    }
    if (aug.enabled) {
      Rng r(derive_seed(cfg.seed, {kAugment, batch}));
      items = augment::augment_batch(items, aug, r);
    }
    Rng drop(derive_seed(cfg.seed, {kDropout, batch}));
    opt.zero_grad();
    const auto y = m.forward(to_batch(items), num::Mode::train, &drop);
    const auto loss = num::bce_loss(y, std::span<const float>(labels));
    const double l = loss.item();
    if (!std::isfinite(l))
      fail(ErrorCode::numerical,
           "train: non-finite loss at batch " + std::to_string(batch + 1) + format_trace(result.trace));
    num::backward(loss);
    opt.step();
    loss_sum += l;
    ++loss_count;

    if ((batch + 1) % cfg.eval_interval == 0) {
      const double v = mean_loss(m, val);
      result.trace.push_back({batch + 1, loss_sum / double(loss_count), v});
      loss_sum = 0;
      loss_count = 0;
      if (v < result.best_val_loss) {
        result.best_val_loss = v;
        result.best_batch = batch + 1;
        result.best = result.trace.size() - 1;
        best = snapshot(m);
      }
    }
  }
  restore(m, best);
  return result;
}

Evaluation evaluate_probabilities(const std::vector<float>& p, const std::vector<float>& labels,
                                  double threshold) {
  require(!p.empty() && p.size() == labels.size(), ErrorCode::invalid_argument,
          "evaluate: need one label per prediction on a non-empty set");
  Evaluation e;
  e.probabilities = p;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool predicted = double(p[i]) >= threshold, actual = labels[i] > 0.5f;
    if (predicted && actual) ++e.confusion.tp;
    else if (predicted) ++e.confusion.fp;
    else if (actual) ++e.confusion.fn;
    else ++e.confusion.tn;
  }
  e.metrics = metrics_from_confusion(e.confusion);
  return e;
}

Evaluation evaluate(model::Model& m, const TestSet& test, double threshold) {
  require(!test.empty(), ErrorCode::invalid_argument, "evaluate: empty test split");
  return evaluate_probabilities(predict(m, test.volumes()), labels_of(test.volumes()), threshold);
}

std::uint64_t run_seed(std::uint64_t seed, std::size_t run) { return derive_seed(seed, {kRun, run}); }
std::uint64_t init_seed(std::uint64_t run_seed) { return derive_seed(run_seed, {kInit}); }

RunReport repeat_runs(const ModelFactory& factory, const TrainSet& train, const ValidationSet& val,
                      const TestLoader& load_test, const TrainConfig& cfg, std::size_t runs,
                      const RunHook& on_run, double threshold) {
  require(runs >= 1, ErrorCode::invalid_argument, "repeat_runs: need at least one run");
  RunReport report;
  report.augment = cfg.augment.enabled ? "on" : "off";
  std::vector<std::optional<model::Model>> trained;
  for (std::size_t r = 0; r < runs; ++r) {
    RunRecord rec;
    rec.run = r;
    rec.seed = run_seed(cfg.seed, r);
    auto m = factory();
    report.descriptor = m.descriptor();
    Rng init(init_seed(rec.seed));
    m.init(init);
    auto c = cfg;
    c.seed = rec.seed;
    try {
      const auto result = train_one(m, train, val, c);
      rec.best_batch = result.best_batch;
      rec.best_val_loss = result.best_val_loss;
      if (on_run) on_run(r, m, result);
      trained.emplace_back(std::move(m));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::numerical) throw;
      rec.aborted = true;
      rec.message = e.what();
      trained.emplace_back();
    }
    report.runs.push_back(std::move(rec));
  }
  const TestSet& test = load_test();
  for (std::size_t r = 0; r < runs; ++r) {
    if (!trained[r]) continue;
    const auto e = evaluate(*trained[r], test, threshold);
    report.runs[r].confusion = e.confusion;
    report.runs[r].metrics = e.metrics;
  }
  return report;
}

RunReport repeat_runs(const ModelFactory& factory, const TrainSet& train, const ValidationSet& val,
                      const TestSet& test, const TrainConfig& cfg, std::size_t runs, const RunHook& on_run,
                      double threshold) {
  return repeat_runs(factory, train, val, [&]() -> const TestSet& { return test; }, cfg, runs, on_run,
                     threshold);
}

ReportSummary summarize(const RunReport& r) {
  ReportSummary s;
  std::vector<std::optional<double>> acc, prec, rec, f1;
  for (const auto& run : r.runs) {
    if (run.aborted) {
      ++s.aborted;
      continue;
    }
    ++s.included;
    acc.push_back(run.metrics.accuracy);
    prec.push_back(run.metrics.precision);
    rec.push_back(run.metrics.recall);
    f1.push_back(run.metrics.f1);
  }
  require(s.aborted == 0 || r.exclude_aborted, ErrorCode::numerical,
          std::to_string(s.aborted) + " run(s) aborted; pass the exclusion flag to summarize the rest");
  s.accuracy = aggregate(acc);
  s.precision = aggregate(prec);
  s.recall = aggregate(rec);
  s.f1 = aggregate(f1);
  return s;
}

std::string format_report(const RunReport& r) {
  std::ostringstream os;
  os << "report v1\n"
     << "model\t" << r.model << "\n"
     << "augment\t" << r.augment << "\n"
     << "exclude_aborted\t" << (r.exclude_aborted ? 1 : 0) << "\n"
     << "descriptor\t" << escape(r.descriptor) << "\n"
     << "run\tseed\tstatus\tbest_batch\tbest_val_loss\ttp\ttn\tfp\tfn\taccuracy\tprecision\trecall\tf1\tmessage\n";
  for (const auto& run : r.runs) {
    os << run.run << "\t" << run.seed << "\t" << (run.aborted ? "aborted" : "ok") << "\t";
    if (run.aborted) {
      os << "\t\t\t\t\t\t\t\t\t\t" << escape(run.message) << "\n";
      continue;
    }
    os << run.best_batch << "\t" << fmt_g(run.best_val_loss) << "\t" << run.confusion.tp << "\t"
       << run.confusion.tn << "\t" << run.confusion.fp << "\t" << run.confusion.fn << "\t"
       << format_metric(run.metrics.accuracy, 6) << "\t" << format_metric(run.metrics.precision, 6) << "\t"
       << format_metric(run.metrics.recall, 6) << "\t" << format_metric(run.metrics.f1, 6) << "\t\n";
  }
  const auto s = summarize(r);
  os << "# population std over " << s.included << " run(s)";
  for (const auto& [name, a] : {std::pair{"accuracy", s.accuracy}, std::pair{"precision", s.precision},
                                std::pair{"recall", s.recall}, std::pair{"f1", s.f1}})
    os << "; " << name << " " << format_metric(a.mean, 6) << " +- " << format_metric(a.stddev, 6);
  os << "\n";
  return os.str();
}

RunReport parse_report(std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  RunReport r;
  auto error = [&](const std::string& what) {
    fail(ErrorCode::parse_error, "report line " + std::to_string(line_no) + ": " + what);
  };
  auto field = [&](const char* key) {
    if (!std::getline(is, line)) error(std::string("missing '") + key + "'");
    ++line_no;
    const auto f = split_tabs(line);
    if (f.size() != 2 || f[0] != key) error(std::string("expected '") + key + "'");
    return f[1];
  };
  if (!std::getline(is, line) || line != "report v1") error("expected 'report v1'");
  ++line_no;
  r.model = field("model");
  r.augment = field("augment");
  r.exclude_aborted = field("exclude_aborted") == "1";
  r.descriptor = unescape(field("descriptor"));
  if (!std::getline(is, line)) error("missing column header");
  ++line_no;
  auto number = [&](const std::string& s) -> std::uint64_t {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty()) error("bad number '" + s + "'");
    return v;
  };
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto f = split_tabs(line);
    if (f.size() != 14) error("expected 14 fields, got " + std::to_string(f.size()));
    RunRecord run;
    run.run = number(f[0]);
    run.seed = number(f[1]);
    if (f[2] == "aborted") {
      run.aborted = true;
      run.message = unescape(f[13]);
    } else if (f[2] == "ok") {
      run.best_batch = number(f[3]);
      run.best_val_loss = std::strtod(f[4].c_str(), nullptr);
      run.confusion = {number(f[5]), number(f[6]), number(f[7]), number(f[8])};
      run.metrics = metrics_from_confusion(run.confusion);
    } else {
      error("bad status '" + f[2] + "'");
    }
    r.runs.push_back(std::move(run));
  }
  return r;
}

std::string format_table(const std::vector<RunReport>& reports) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-24s %-12s %-5s %-15s %-15s %-15s %-15s\n", "Model", "Augmentation", "Runs",
                "Accuracy", "F1", "Precision", "Recall");
  out += buf;
  std::snprintf(buf, sizeof buf, "%-24s %-12s %-5s %-7s %-7s %-7s %-7s %-7s %-7s %-7s %-7s\n", "", "", "", "Mean",
                "Std", "Mean", "Std", "Mean", "Std", "Mean", "Std");
  out += buf;
  for (const auto& r : reports) {
    const auto s = summarize(r);
    auto cell = [](const Aggregate& a) {
      char c[32];
      std::snprintf(c, sizeof c, "%-7s %-7s", format_metric(a.mean).c_str(), format_metric(a.stddev).c_str());
      return std::string(c);
    };
    std::snprintf(buf, sizeof buf, "%-24s %-12s %-5zu %s %s %s %s\n", r.model.c_str(), r.augment.c_str(),
                  s.included, cell(s.accuracy).c_str(), cell(s.f1).c_str(), cell(s.precision).c_str(),
                  cell(s.recall).c_str());
    out += buf;
    if (s.aborted > 0) {
      std::snprintf(buf, sizeof buf, "%-24s %zu aborted run(s) excluded\n", "", s.aborted);
      out += buf;
    }
  }
  out += "Std is the population standard deviation over runs.\n";
  return out;
}

template double mean_loss<Split::train>(model::Model&, const TrainSet&, std::size_t);
template double mean_loss<Split::validation>(model::Model&, const ValidationSet&, std::size_t);

}  // namespace utnas::harness

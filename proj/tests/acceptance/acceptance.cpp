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
// Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "utnas/augment/augment.hpp"
#include "utnas/common/error.hpp"
#include "utnas/harness/data.hpp"
#include "utnas/harness/io.hpp"
#include "utnas/harness/metrics.hpp"
#include "utnas/harness/train.hpp"
#include "utnas/model/architectures.hpp"
#include "utnas/nas/search.hpp"
#include "utnas/phantom/dataset.hpp"
#include "utnas/signal/ascan.hpp"

namespace fs = std::filesystem;
using namespace utnas;
using num::Tensor;
using T = Tensor<double>;

namespace {

// Tolerances and budgets.
constexpr std::size_t kGradCases = 102;
constexpr double kGradTolerance = 1e-5;
constexpr double kGradStep = 1e-5;
constexpr double kGradSeconds = 120;
constexpr std::size_t kConvCases = 60;
constexpr double kConvTolerance = 1e-12;
constexpr std::size_t kMetricCases = 1000;
constexpr double kMetricTolerance = 1e-12;
constexpr std::size_t kGenomeDraws = 100000;
constexpr double kPartitionTolerance = 0.01;
constexpr std::size_t kNasModels = 100;
constexpr double kCountTolerance = 0.20;
constexpr double kFlatTolerance = 0.01;
constexpr std::size_t kSinusoidLength = 4096;  // at least 82 cycles
constexpr double kKsTolerance = 0.02;
constexpr std::size_t kKsDraws = 10000;
constexpr std::int64_t kMaxDilation = 15;
constexpr std::size_t kPaddedLength = 1024;
constexpr double kDeskAccuracy = 0.90;
constexpr double kDeskSeconds = 15 * 60;
constexpr std::size_t kDeskRuns = 3;
constexpr std::size_t kDeskBatches = 150;
constexpr std::size_t kBenefitRuns = 5;
constexpr std::size_t kBenefitBatches = 100;
constexpr double kBenefitNoiseScale = 1.5;
constexpr double kBenefitExtraScales[] = {1.0, 1.25};
constexpr std::size_t kBenefitPerClass = 60;
constexpr std::size_t kSmokeIterations = 5;
constexpr std::size_t kSmokeRetrains = 2;
constexpr std::size_t kSmokeBatches = 30;
constexpr std::size_t kDefaultPerClass = 300;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "utnas_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

phantom::SynthConfig desk_config() {
  return phantom::parse_synth_config(harness::read_text(fs::path(UTNAS_CONFIG_DIR) / "desk.cfg"));
}

// Desk dataset shared by the training criteria.
const fs::path& desk_dataset() {
  static const fs::path dir = [] {
    auto d = work_dir() / "desk";
    phantom::build_dataset(desk_config(), d, 2026);
    return d;
  }();
  return dir;
}

int run_cli(const std::string& args) {
  const auto cmd = std::string(UTNAS_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

// Empty string when both trees hold the same files with the same bytes.
std::string compare_trees(const fs::path& a, const fs::path& b) {
  auto files = [](const fs::path& root) {
    std::set<std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file()) out.insert(fs::relative(e.path(), root).string());
    return out;
  };
  const auto fa = files(a), fb = files(b);
  if (fa != fb) return "file sets differ";
  if (fa.empty()) return "no files";
  for (const auto& f : fa)
    if (harness::read_file(a / f) != harness::read_file(b / f)) return f + " differs";
  return "";
}

// ---------------------------------------------------------------------------

struct ConvCase {
  num::Shape x, w;
  num::Conv3dOptions o;
  bool bias = false;
};

ConvCase random_conv_case(Rng& rng) {
  ConvCase c;
  const auto groups = std::size_t(rng.uniform_int(1, 3));
  const bool depthwise = rng.bernoulli(0.3);
  const auto cin_g = depthwise ? 1 : std::size_t(rng.uniform_int(1, 2));
  const auto cout_g = std::size_t(rng.uniform_int(1, 2));
  c.o.groups = groups;
  num::Shape k(3), spatial(3);
  for (std::size_t a = 0; a < 3; ++a) {
    k[a] = std::size_t(rng.uniform_int(1, 3));
    c.o.stride[a] = std::size_t(rng.uniform_int(1, 2));
    c.o.dilation[a] = std::size_t(rng.uniform_int(1, 2));
    c.o.padding[a] = std::size_t(rng.uniform_int(0, 1));
    spatial[a] = c.o.dilation[a] * (k[a] - 1) + 1 + std::size_t(rng.uniform_int(0, 3));
  }
  c.x = {std::size_t(rng.uniform_int(1, 2)), groups * cin_g, spatial[0], spatial[1], spatial[2]};
  c.w = {groups * cout_g, cin_g, k[0], k[1], k[2]};
  c.bias = rng.bernoulli(0.5);
  return c;
}

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  using testing::random_tensor;
  using F = std::function<T(const std::vector<T>&)>;
  const std::vector<std::string> ops = {"add",        "mul",         "sum",      "reshape",    "conv3d",
                                        "max_pool",   "avg_pool",    "gap",      "bn_train",   "bn_infer",
                                        "leaky_relu", "gelu",        "sigmoid",  "dropout",    "linear",
                                        "bce",        "conv_chain"};
  double worst = 0;
  std::string worst_op;
  std::size_t cases = 0;
  for (std::size_t i = 0; i < kGradCases; ++i) {
    const auto& op = ops[i % ops.size()];
    std::vector<T> in;
    F f;
    const num::Shape s = {std::size_t(rng.uniform_int(1, 2)), std::size_t(rng.uniform_int(1, 3)),
                          std::size_t(rng.uniform_int(2, 3)), std::size_t(rng.uniform_int(2, 3)),
                          std::size_t(rng.uniform_int(2, 5))};
    if (op == "add" || op == "mul") {
      in = {random_tensor(s, rng), random_tensor(s, rng)};
      f = op == "add" ? F([](const std::vector<T>& v) { return num::add(v[0], v[1]); })
                      : F([](const std::vector<T>& v) { return num::mul(v[0], v[1]); });
    } else if (op == "sum") {
      in = {random_tensor(s, rng)};
      f = [](const std::vector<T>& v) { return num::sum(v[0]); };
    } else if (op == "reshape") {
      in = {random_tensor(s, rng)};
      const num::Shape r = {s[0] * s[1], s[2] * s[3] * s[4]};
      f = [r](const std::vector<T>& v) { return num::reshape(v[0], r); };
    } else if (op == "conv3d" || op == "conv_chain") {
      const auto c = random_conv_case(rng);
      in = {random_tensor(c.x, rng), random_tensor(c.w, rng)};
      if (c.bias) in.push_back(random_tensor({c.w[0]}, rng));
      const bool chain = op == "conv_chain";
      f = [c, chain](const std::vector<T>& v) {
        auto y = num::conv3d(v[0], v[1], c.bias ? std::optional<T>(v[2]) : std::nullopt, c.o);
        return chain ? num::activation(num::ActivationKind::gelu, y) : y;
      };
    } else if (op == "max_pool" || op == "avg_pool") {
      num::Pool3dOptions o;
      for (std::size_t a = 0; a < 3; ++a) {
        o.kernel[a] = std::size_t(rng.uniform_int(1, 2));
        o.stride[a] = std::size_t(rng.uniform_int(1, 2));
        o.padding[a] = o.kernel[a] > 1 ? std::size_t(rng.uniform_int(0, 1)) : 0;
      }
      in = {random_tensor(s, rng)};
      const auto kind = op == "max_pool" ? num::PoolKind::max : num::PoolKind::avg;
      f = [o, kind](const std::vector<T>& v) { return num::pool3d(kind, v[0], o); };
    } else if (op == "gap") {
      in = {random_tensor(s, rng)};
      f = [](const std::vector<T>& v) { return num::global_avg_pool(v[0]); };
    } else if (op == "bn_train" || op == "bn_infer") {
      const bool train = op == "bn_train";
      in = {random_tensor(s, rng), random_tensor({s[1]}, rng, true, 0.5, 1.5), random_tensor({s[1]}, rng)};
      const auto mean = testing::random_values(s[1], rng);
      const auto var = testing::random_values(s[1], rng, 0.5, 2.0);
      f = [mean, var, train](const std::vector<T>& v) {
        auto m = mean, q = var;
        return num::batch_norm(v[0], v[1], v[2], std::span<double>(m), std::span<double>(q),
                               train ? num::Mode::train : num::Mode::infer);
      };
    } else if (op == "leaky_relu" || op == "gelu" || op == "sigmoid") {
      const auto kind = op == "leaky_relu" ? num::ActivationKind::leaky_relu
                        : op == "gelu"     ? num::ActivationKind::gelu
                                           : num::ActivationKind::sigmoid;
      in = {random_tensor(s, rng, true, -3.0, 3.0)};
      f = [kind](const std::vector<T>& v) { return num::activation(kind, v[0]); };
    } else if (op == "dropout") {
      in = {random_tensor(s, rng)};
      const auto seed = rng.next_u64();
      f = [seed](const std::vector<T>& v) {
        Rng r(seed);
        return num::dropout(v[0], 0.3, num::Mode::train, r);
      };
    } else if (op == "linear") {
      const auto b = std::size_t(rng.uniform_int(1, 4)), fi = std::size_t(rng.uniform_int(1, 6)),
                 fo = std::size_t(rng.uniform_int(1, 3));
      in = {random_tensor({b, fi}, rng), random_tensor({fo, fi}, rng), random_tensor({fo}, rng)};
      f = [](const std::vector<T>& v) { return num::linear(v[0], v[1], v[2]); };
    } else {
      const auto b = std::size_t(rng.uniform_int(1, 8));
      std::vector<double> labels(b);
      for (auto& l : labels) l = rng.bernoulli(0.5) ? 1.0 : 0.0;
      in = {random_tensor({b, 1}, rng, true, 0.05, 0.95)};
      f = [labels](const std::vector<T>& v) { return num::bce_loss(v[0], std::span<const double>(labels)); };
    }
    const auto r = testing::gradcheck(f, in, rng, kGradStep);
    if (r.max_relative_error > worst) {
      worst = r.max_relative_error;
      worst_op = op;
    }
    ++cases;
  }
  const double secs = seconds_since(t0);
  return {worst < kGradTolerance && secs < kGradSeconds && cases >= 100,
          fmt("cases=%zu ops=%zu max_rel_err=%.3g (%s) time=%.1fs", cases, ops.size(), worst, worst_op.c_str(),
              secs)};
}

Outcome convolution_oracle() {
  Rng rng(102);
  double worst = 0, worst_element = 0;
  std::size_t grouped = 0, strided = 0, dilated = 0;
  for (std::size_t i = 0; i < kConvCases; ++i) {
    const auto c = random_conv_case(rng);
    const auto x = testing::random_values(num::numel(c.x), rng);
    const auto w = testing::random_values(num::numel(c.w), rng);
    const auto b = testing::random_values(c.w[0], rng);
    auto y = num::conv3d(T::from(c.x, x), T::from(c.w, w),
                         c.bias ? std::optional<T>(T::from({c.w[0]}, b)) : std::nullopt, c.o);
    num::Shape os;
    const auto ref = testing::naive_conv3d(x, c.x, w, c.w, c.bias ? &b : nullptr, c.o.stride, c.o.dilation,
                                           c.o.padding, c.o.groups, &os);
    if (y.shape() != os) return {false, fmt("case %zu: shape mismatch", i)};
    double diff2 = 0, ref2 = 0;
    for (std::size_t j = 0; j < ref.size(); ++j) {
      const double d = y.values()[j] - ref[j];
      diff2 += d * d;
      ref2 += ref[j] * ref[j];
      worst_element = std::max(worst_element, testing::relative_error(y.values()[j], ref[j]));
    }
    worst = std::max(worst, std::sqrt(diff2 / std::max(ref2, 1e-300)));
    grouped += c.o.groups > 1;
    strided += c.o.stride != num::Triple{1, 1, 1};
    dilated += c.o.dilation != num::Triple{1, 1, 1};
  }
  return {worst <= kConvTolerance,
          fmt("shapes=%zu grouped=%zu strided=%zu dilated=%zu max_normwise_rel_err=%.3g max_elementwise=%.3g",
              kConvCases, grouped, strided, dilated, worst, worst_element)};
}

Outcome metric_identity() {
  Rng rng(103);
  double worst = 0;
  std::size_t guard_errors = 0, undefined = 0;
  for (std::size_t i = 0; i < kMetricCases; ++i) {
    harness::Confusion c;
    auto draw = [&] { return rng.bernoulli(0.25) ? 0u : std::uint64_t(rng.uniform_int(1, 500)); };
    do {
      c = {draw(), draw(), draw(), draw()};
    } while (c.total() == 0);
    const auto m = harness::metrics_from_confusion(c);
    const double tp = double(c.tp), tn = double(c.tn), fp = double(c.fp), fn = double(c.fn);
    worst = std::max(worst, std::abs(m.accuracy - (tp + tn) / (tp + tn + fp + fn)));
    const bool p_def = c.tp + c.fp > 0, r_def = c.tp + c.fn > 0;
    guard_errors += m.precision.has_value() != p_def;
    guard_errors += m.recall.has_value() != r_def;
    if (p_def && m.precision) worst = std::max(worst, std::abs(*m.precision - tp / (tp + fp)));
    if (r_def && m.recall) worst = std::max(worst, std::abs(*m.recall - tp / (tp + fn)));
    const bool f_def = p_def && r_def && tp > 0;
    guard_errors += m.f1.has_value() != f_def;
    if (f_def && m.f1) {
      const double p = tp / (tp + fp), r = tp / (tp + fn);
      worst = std::max(worst, std::abs(*m.f1 - 2 * p * r / (p + r)));
    }
    undefined += !p_def || !r_def || !f_def;
  }
  return {worst <= kMetricTolerance && guard_errors == 0,
          fmt("cases=%zu max_abs_err=%.3g guard_mismatches=%zu cases_with_undefined=%zu", kMetricCases, worst,
              guard_errors, undefined)};
}

Outcome partition_distribution() {
  // Walk every sequence of "new group" decisions for four blocks.
  std::map<std::vector<std::size_t>, double> want;
  for (unsigned mask = 0; mask < 8; ++mask) {
    std::vector<std::size_t> sizes = {1};
    double p = 1;
    for (unsigned i = 0; i < 3; ++i) {
      const double pn = 1.0 / double(sizes.back() + 1);
      if (mask >> i & 1) {
        p *= pn;
        sizes.push_back(1);
      } else {
        p *= 1 - pn;
        ++sizes.back();
      }
    }
    want[sizes] += p;
  }
  std::map<std::vector<std::size_t>, double> got;
  Rng rng(104);
  std::size_t n = 0;
  while (n < kGenomeDraws) {
    const auto g = nas::sample_genome(rng);
    if (g.blocks.size() != 4) continue;
    got[g.group_sizes()] += 1;
    ++n;
  }
  double worst = 0;
  for (const auto& [k, p] : want) worst = std::max(worst, std::abs(got[k] / double(n) - p));
  const bool extra = got.size() > want.size();
  return {worst <= kPartitionTolerance && !extra && std::abs(want.at({4}) - 0.25) < 1e-15 &&
              std::abs(want.at({1, 1, 1, 1}) - 0.125) < 1e-15,
          fmt("genomes=%zu partitions=%zu P[4]=%.4f(1/4) P[1,1,1,1]=%.4f(1/8) max_abs_dev=%.4f", n, want.size(),
              got[{4}] / double(n), got[{1, 1, 1, 1}] / double(n), worst)};
}

Outcome shape_contracts() {
  const num::Shape batch = {2, 1, 64, 64, 1024};
  Rng rng(105);
  std::vector<float> x(num::numel(batch));
  for (auto& v : x) v = float(rng.uniform());
  const auto input = model::Tensor::from(batch, x);
  auto ok = [](const model::Tensor& y) {
    if (y.shape() != model::Shape{2, 1}) return false;
    for (float p : y.values())
      if (!(p > 0.0f && p < 1.0f)) return false;
    return true;
  };
  std::size_t hand = 0;
  for (auto fam : {model::Family::reduction, model::Family::constant})
    for (auto ds : {model::Downsample::conv, model::Downsample::maxpool}) {
      auto m = model::build(model::default_spec(fam, ds));
      m.init(rng);
      hand += ok(m.forward(input, num::Mode::infer));
    }
  std::size_t nas_ok = 0, stem_ok = 0;
  for (std::size_t i = 0; i < kNasModels; ++i) {
    auto m = nas::instantiate(nas::sample_genome(rng));
    m.init(rng);
    nas_ok += ok(m.forward(input, num::Mode::infer));
    for (const auto& [name, shape] : m.trace(2))
      if (name.rfind("0 3 ", 0) == 0) stem_ok += shape == model::Shape{2, 64, 16, 16, 128};
  }
  return {hand == 4 && nas_ok == kNasModels && stem_ok == kNasModels,
          fmt("hand_models=%zu/4 nas_models=%zu/%zu stem_(2,64,16,16,128)=%zu/%zu", hand, nas_ok, kNasModels,
              stem_ok, kNasModels)};
}

Outcome parameter_counts() {
  struct Row {
    model::Family f;
    model::Downsample d;
    double target;
  };
  const Row rows[] = {{model::Family::reduction, model::Downsample::conv, 1.54e6},
                      {model::Family::reduction, model::Downsample::maxpool, 0.60e6},
                      {model::Family::constant, model::Downsample::conv, 1.23e6},
                      {model::Family::constant, model::Downsample::maxpool, 0.69e6}};
  bool pass = true;
  std::string detail;
  for (const auto& r : rows) {
    const auto n = double(model::build(model::default_spec(r.f, r.d)).param_count());
    const double dev = (n - r.target) / r.target;
    pass = pass && std::abs(dev) <= kCountTolerance;
    detail += fmt("%s-%s=%.0f(%+.1f%%) ", std::string(model::to_string(r.f)).c_str(),
                  std::string(model::to_string(r.d)).c_str(), n, 100 * dev);
  }
  detail.pop_back();
  return {pass, detail};
}

Outcome signal_pipeline() {
  Rng rng(107);
  double flat = 0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t n = kSinusoidLength;
    const double f = rng.uniform(0.02, 0.2), ph = rng.uniform(0, 2 * std::numbers::pi), a = rng.uniform(0.5, 2);
    std::vector<double> s(n);
    for (std::size_t j = 0; j < n; ++j) s[j] = a * std::sin(2 * std::numbers::pi * f * double(j) + ph);
    const auto env = signal::envelope(s);
    for (std::size_t j = n / 10; j < n - n / 10; ++j) flat = std::max(flat, std::abs(env[j] / a - 1));
  }

  auto cfg = desk_config();
  cfg.echo.offset_min = 30;
  cfg.echo.offset_max = 50;
  cfg.probe.record_length = cfg.padded_length;
  std::size_t ascans = 0, aligned = 0, exact_max = 0, volumes = 0;
  for (int i = 0; i < 6; ++i) {
    std::optional<phantom::DefectSpec> d;
    if (i % 2) d = phantom::place_defect(rng.uniform(3, 15), 1.5 * double(1 + i % 4), cfg.probe, rng);
    auto v = phantom::simulate_volume(cfg.material, cfg.probe, cfg.echo, d, rng);
    const auto al = signal::preprocess(v, cfg.padded_length);
    ++volumes;
    exact_max += *std::max_element(v.data().begin(), v.data().end()) == 1.0;
    for (std::size_t k = 0; k < v.n_ascans(); ++k) {
      const auto a = v.ascan(k);
      ++ascans;
      aligned += std::max_element(a.begin(), a.end()) == a.begin();
    }
    if (!al.flagged.empty()) return {false, "flagged A-scans in a jittered phantom"};
  }
  return {flat <= kFlatTolerance && aligned == ascans && exact_max == volumes,
          fmt("envelope_max_dev=%.4g aligned=%zu/%zu max_exactly_1=%zu/%zu", flat, aligned, ascans, exact_max,
              volumes)};
}

Outcome augmentation_invariants() {
  augment::AugmentConfig cfg;
  cfg.padded_length = kPaddedLength;
  Rng rng(108);

  // Scale factors are recovered from a constant tail.
  signal::Volume flat(100, 100, 16, signal::Label::defect);
  for (std::size_t k = 0; k < flat.n_ascans(); ++k) {
    auto a = flat.ascan(k);
    std::fill(a.begin(), a.end(), 0.5);
    a[0] = 1.0;
  }
  const auto scaled = augment::scale_augment(flat, cfg, rng);
  std::vector<double> factors;
  bool peak_ok = true;
  for (std::size_t k = 0; k < scaled.n_ascans(); ++k) {
    const auto a = scaled.ascan(k);
    factors.push_back(a[1] / 0.5);
    peak_ok = peak_ok && a[0] == 1.0 && std::max_element(a.begin(), a.end()) == a.begin();
  }
  std::sort(factors.begin(), factors.end());
  double ks = 0;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    const double cdf = std::clamp((factors[i] - cfg.scale_lo) / (cfg.scale_hi - cfg.scale_lo), 0.0, 1.0);
    const double n = double(factors.size());
    ks = std::max({ks, std::abs(double(i + 1) / n - cdf), std::abs(cdf - double(i) / n)});
  }

  // Stretches are recovered from a linear ramp.
  signal::Volume ramp(100, 100, kPaddedLength, signal::Label::defect);
  const double span = double(kPaddedLength - 1);
  const std::size_t kProbe = 100;
  for (std::size_t k = 0; k < ramp.n_ascans(); ++k) {
    auto a = ramp.ascan(k);
    for (std::size_t j = 0; j < a.size(); ++j) a[j] = 0.5 + 0.4 * double(j) / span;
    a[0] = 1.0;
  }
  const auto dil = augment::dilate_augment(ramp, cfg, rng);
  std::int64_t lo = 0, hi = 0;
  std::set<std::int64_t> seen;
  bool tails_ok = dil.n_time() == kPaddedLength;
  for (std::size_t k = 0; k < dil.n_ascans(); ++k) {
    const auto a = dil.ascan(k);
    const double d = 0.4 * double(kProbe) / (a[kProbe] - 0.5) - span;
    const auto delta = std::int64_t(std::llround(d));
    if (std::abs(d - double(delta)) > 1e-6) tails_ok = false;
    lo = std::min(lo, delta);
    hi = std::max(hi, delta);
    seen.insert(delta);
    peak_ok = peak_ok && a[0] == 1.0 && std::max_element(a.begin(), a.end()) == a.begin();
    const auto end = std::int64_t(kPaddedLength) + std::min<std::int64_t>(delta, 0);
    for (std::int64_t j = 1; j < std::int64_t(kPaddedLength); ++j)
      if ((j < end) != (a[std::size_t(j)] > 0)) tails_ok = false;
  }

  // Full batches keep length and peak.
  std::vector<signal::Volume> batch;
  for (int i = 0; i < 4; ++i) {
    signal::Volume v(8, 8, kPaddedLength, signal::Label::defect);
    for (std::size_t k = 0; k < v.n_ascans(); ++k) {
      auto a = v.ascan(k);
      for (auto& x : a) x = rng.uniform(0.0, 0.8);
      a[0] = 1.0;
    }
    batch.push_back(std::move(v));
  }
  bool range_ok = true;
  for (const auto& v : augment::augment_batch(batch, cfg, rng)) {
    range_ok = range_ok && v.n_time() == kPaddedLength;
    for (std::size_t k = 0; k < v.n_ascans(); ++k) {
      const auto a = v.ascan(k);
      peak_ok = peak_ok && a[0] == 1.0 && std::max_element(a.begin(), a.end()) == a.begin();
      for (double x : a) range_ok = range_ok && x >= 0 && x <= cfg.scale_hi;
    }
  }
  return {ks < kKsTolerance && factors.size() == kKsDraws && peak_ok && tails_ok && range_ok &&
              lo >= -kMaxDilation && hi <= kMaxDilation,
          fmt("ks=%.4f draws=%zu delta=[%lld,%lld] distinct=%zu peak_fixed=%d zero_tails=%d length_%zu=%d", ks,
              factors.size(), (long long)lo, (long long)hi, seen.size(), int(peak_ok), int(tails_ok), kPaddedLength,
              int(range_ok))};
}

harness::TrainConfig desk_train(std::size_t batches, bool augment, std::uint64_t seed) {
  harness::TrainConfig c;
  c.max_batches = batches;
  c.augment.enabled = augment;
  c.seed = seed;
  return c;
}

harness::ModelFactory reduction_conv(const model::Shape& item) {
  const auto spec = model::default_spec(model::Family::reduction, model::Downsample::conv, item);
  return [spec] { return model::build(spec); };
}

Outcome desk_separability() {
  const harness::DatasetDir dir(desk_dataset());
  harness::AccessLog log;
  const auto train = dir.load<harness::Split::train>(log);
  const auto val = dir.load<harness::Split::validation>(log);
  std::optional<harness::TestSet> test;
  const auto t0 = std::chrono::steady_clock::now();
  const auto report = harness::repeat_runs(
      reduction_conv(train.item_shape()), train, val,
      [&]() -> const harness::TestSet& {
        test = dir.load<harness::Split::test>(log);
        return *test;
      },
      desk_train(kDeskBatches, true, 9), kDeskRuns);
  const double secs = seconds_since(t0);
  const auto s = harness::summarize(report);
  std::string accs;
  for (const auto& r : report.runs) accs += fmt("%.3f,", r.metrics.accuracy);
  accs.pop_back();
  const double mean = s.accuracy.mean.value_or(0);
  return {mean >= kDeskAccuracy && secs <= kDeskSeconds,
          fmt("mean_acc=%.3f runs=[%s] batches=%zu time=%.0fs budget=%.0fs threads=1", mean, accs.c_str(),
              kDeskBatches, secs, kDeskSeconds)};
}

// Fresh held-out volumes whose noise mean and spread are scaled beyond the
// training distribution.
harness::TestSet perturbed_test(double noise_scale, std::uint64_t seed) {
  const auto cfg = desk_config();
  auto noise = phantom::reference_noise_model(cfg, derive_seed(seed, {1}));
  for (auto& m : noise.mean) m *= noise_scale;
  for (auto& s : noise.stddev) s *= noise_scale;
  Rng rng(seed);
  const auto diameters = cfg.diameter.values(), depths = cfg.depth.values();
  std::vector<signal::Volume> out;
  for (std::size_t i = 0; i < 2 * kBenefitPerClass; ++i) {
    std::optional<phantom::DefectSpec> d;
    if (i % 2 == 0) {
      const double dia = diameters[std::size_t(rng.uniform_int(0, std::int64_t(diameters.size()) - 1))];
      const double dep = depths[std::size_t(rng.uniform_int(0, std::int64_t(depths.size()) - 1))];
      d = phantom::place_defect(dia, dep, cfg.probe, rng);
    }
    auto v = phantom::clean_volume(cfg, d, rng);
    phantom::apply_noise(v, noise, rng);
    phantom::quantize(v);
    v.set_label(d ? signal::Label::defect : signal::Label::defect_free);
    out.push_back(std::move(v));
  }
  return harness::TestSet(std::move(out));
}

Outcome augmentation_benefit() {
  const harness::DatasetDir dir(desk_dataset());
  harness::AccessLog log;
  const auto train = dir.load<harness::Split::train>(log);
  const auto val = dir.load<harness::Split::validation>(log);
  const auto test = perturbed_test(kBenefitNoiseScale, 10);
  // Milder scalings are reported alongside; only kBenefitNoiseScale decides.
  std::vector<std::pair<double, harness::TestSet>> extra;
  for (double scale : kBenefitExtraScales) extra.emplace_back(scale, perturbed_test(scale, 10));
  double mean[2] = {};
  std::vector<std::array<double, 2>> extra_mean(extra.size());
  for (int on = 0; on < 2; ++on) {
    const auto hook = [&](std::size_t, model::Model& m, const harness::TrainResult&) {
      for (std::size_t i = 0; i < extra.size(); ++i)
        extra_mean[i][on] += harness::evaluate(m, extra[i].second).metrics.accuracy / double(kBenefitRuns);
    };
    const auto report = harness::repeat_runs(reduction_conv(train.item_shape()), train, val, test,
                                             desk_train(kBenefitBatches, on == 1, 10), kBenefitRuns, hook);
    mean[on] = harness::summarize(report).accuracy.mean.value_or(0);
  }
  std::string others;
  for (std::size_t i = 0; i < extra.size(); ++i)
    others += fmt(" [scale %.2f: on=%.3f off=%.3f]", extra[i].first, extra_mean[i][1], extra_mean[i][0]);
  return {mean[1] >= mean[0], fmt("mean_acc_augment_on=%.3f mean_acc_augment_off=%.3f runs=%zu noise_scale=%.2f%s",
                                  mean[1], mean[0], kBenefitRuns, kBenefitNoiseScale, others.c_str())};
}

Outcome nas_smoke() {
  const harness::DatasetDir dir(desk_dataset());
  harness::AccessLog log;
  const auto train = dir.load<harness::Split::train>(log);
  const auto val = dir.load<harness::Split::validation>(log);
  nas::SearchConfig cfg;
  cfg.iterations = kSmokeIterations;
  cfg.retrains = kSmokeRetrains;
  cfg.train.max_batches = kSmokeBatches;
  cfg.train.eval_interval = 10;
  cfg.seed = 11;
  const auto full = work_dir() / "search_full", resumed = work_dir() / "search_resumed";
  const auto t0 = std::chrono::steady_clock::now();
  const auto board = nas::random_search(cfg, train, val, full);
  const auto part = nas::random_search(cfg, train, val, resumed, 2);
  const auto rest = nas::random_search(cfg, train, val, resumed);
  const double secs = seconds_since(t0);
  bool sorted = board.size() == kSmokeIterations;
  for (std::size_t i = 1; i < board.size(); ++i)
    sorted = sorted && (board[i - 1].mean_val_loss < board[i].mean_val_loss ||
                        (board[i - 1].mean_val_loss == board[i].mean_val_loss &&
                         board[i - 1].iteration < board[i].iteration));
  const bool resume_ok = part.size() == 2 && rest.size() == kSmokeIterations &&
                         compare_trees(full, resumed).empty();
  std::size_t round_trips = 0;
  for (const auto& e : board) {
    const auto text = harness::read_text(full / e.genome_file);
    round_trips += nas::serialize_genome(nas::parse_genome(text)) == text;
  }
  return {sorted && resume_ok && round_trips == board.size() && log.reads(harness::Split::test) == 0,
          fmt("entries=%zu sorted=%d resumed_identical=%d round_trips=%zu/%zu best_loss=%.4g test_reads=%zu "
              "time=%.0fs",
              board.size(), int(sorted), int(resume_ok), round_trips, board.size(),
              board.empty() ? 0.0 : board[0].mean_val_loss, log.reads(harness::Split::test), secs)};
}

Outcome reproducibility() {
  const auto w = work_dir() / "repro";
  const auto cfg = (fs::path(UTNAS_CONFIG_DIR) / "desk.cfg").string();
  std::string detail;
  bool pass = true;
  auto check = [&](const char* what, int rc_a, int rc_b, const fs::path& a, const fs::path& b) {
    const auto diff = (rc_a || rc_b) ? std::string("command failed") : compare_trees(a, b);
    pass = pass && diff.empty();
    detail += fmt("%s=%s ", what, diff.empty() ? "identical" : diff.c_str());
  };
  const auto d1 = w / "data1", d2 = w / "data2";
  check("synth", run_cli("synth --out " + d1.string() + " --config " + cfg + " --seed 12"),
        run_cli("synth --out " + d2.string() + " --config " + cfg + " --seed 12"), d1, d2);
  const auto t1 = w / "train1", t2 = w / "train2";
  const auto targs = " --arch reduction --pool conv --augment on --data " + d1.string() +
                     " --runs 1 --seed 12 --batches 20 --out ";
  check("train", run_cli("train" + targs + t1.string()), run_cli("train" + targs + t2.string()), t1, t2);
  const auto s1 = w / "search1", s2 = w / "search2";
  const auto sargs = " --iters 2 --retrain 1 --batches 10 --data " + d1.string() + " --seed 12 --out ";
  check("search", run_cli("search" + sargs + s1.string()), run_cli("search" + sargs + s2.string()), s1, s2);
  fs::remove_all(w);
  detail.pop_back();
  return {pass, detail};
}

Outcome dataset_counts() {
  const auto dir = work_dir() / "default";
  const auto cfg = phantom::parse_synth_config(harness::read_text(fs::path(UTNAS_CONFIG_DIR) / "full.cfg"));
  const auto s = phantom::build_dataset(cfg, dir, 13);
  std::size_t defect = 0, clean = 0, valid = 0;
  const auto entries = harness::read_manifest(dir);
  for (const auto& e : entries) {
    const auto v = harness::read_volume(dir / e.path);
    defect += e.label == signal::Label::defect;
    clean += e.label == signal::Label::defect_free;
    valid += v.label() == e.label && v.n_scan() == 64 && v.n_array() == 64 && v.n_time() == 1024;
  }
  fs::remove_all(dir);
  return {defect == kDefaultPerClass && clean == kDefaultPerClass && valid == entries.size() &&
              s.defect == defect && s.defect_free == clean,
          fmt("defect=%zu defect_free=%zu valid_utv1=%zu/%zu split=%zu/%zu/%zu", defect, clean, valid,
              entries.size(), s.train, s.validation, s.test)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
      {"gradient suite", gradient_suite},
      {"convolution oracle", convolution_oracle},
      {"metric identity", metric_identity},
      {"group partition distribution", partition_distribution},
      {"shape contracts", shape_contracts},
      {"parameter counts", parameter_counts},
      {"signal pipeline", signal_pipeline},
      {"augmentation invariants", augmentation_invariants},
      {"desk-scale separability", desk_separability},
      {"augmentation benefit", augmentation_benefit},
      {"search smoke", nas_smoke},
      {"reproducibility", reproducibility},
      {"dataset counts", dataset_counts},
  };
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(std::strtoul(argv[i], nullptr, 10));

  std::size_t failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(i + 1)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const Error& e) {
      o = {false, fmt("error code=%s message=%s", std::string(to_string(e.code())).c_str(), e.what())};
    } catch (const std::exception& e) {
      o = {false, fmt("error %s", e.what())};
    }
    failed += !o.pass;
    std::printf("%s %2zu %-30s %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(work_dir());
  return failed == 0 ? 0 : 1;
}

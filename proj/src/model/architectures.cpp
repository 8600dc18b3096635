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
#include "utnas/model/architectures.hpp"

#include <charconv>
#include <sstream>

#include "utnas/common/error.hpp"

namespace utnas::model {

namespace {

using num::ActivationKind;

void bn_act(Sequential& s, std::size_t channels) {
  s.emplace<BatchNorm>(channels);
  s.emplace<Activation>(ActivationKind::leaky_relu);
}

void conv(Sequential& s, std::size_t in, std::size_t out, Triple kernel, Triple stride) {
  ConvSpec c;
  c.in = in;
  c.out = out;
  c.kernel = kernel;
  c.stride = stride;
  for (std::size_t a = 0; a < 3; ++a) c.padding[a] = num::same_padding(kernel[a], 1);
  s.emplace<Conv3d>(c);
}

void downsample(Sequential& s, Downsample mode, std::size_t channels, Triple kernel, Triple stride) {
  if (mode == Downsample::conv) {
    conv(s, channels, channels, kernel, stride);
  } else {
    s.emplace<Pool3d>(num::PoolKind::max, num::Pool3dOptions{stride, stride, {1, 1, 1}, {0, 0, 0}});
  }
}

// conv -> BN -> LReLU -> downsample -> BN -> LReLU
LayerPtr feature_first(std::string name, Downsample mode, std::size_t in, std::size_t out,
                       Triple kernel, Triple stride) {
  auto b = std::make_unique<Sequential>(std::move(name));
  conv(*b, in, out, kernel, {1, 1, 1});
  bn_act(*b, out);
  downsample(*b, mode, out, kernel, stride);
  bn_act(*b, out);
  return b;
}

// downsample -> BN -> LReLU -> conv -> BN -> LReLU
LayerPtr down_first(std::string name, Downsample mode, std::size_t in, std::size_t out,
                    Triple kernel, Triple stride) {
  auto b = std::make_unique<Sequential>(std::move(name));
  downsample(*b, mode, in, kernel, stride);
  bn_act(*b, in);
  conv(*b, in, out, kernel, {1, 1, 1});
  bn_act(*b, out);
  return b;
}

void check_spec(const ArchSpec& spec, Family family, std::size_t blocks) {
  require(spec.family == family, ErrorCode::invalid_argument, "arch: family mismatch");
  require(spec.channels.size() == blocks, ErrorCode::invalid_argument,
          "arch: " + std::string(to_string(family)) + " needs " + std::to_string(blocks) +
              " channel entries, got " + std::to_string(spec.channels.size()));
  for (auto c : spec.channels) require(c > 0, ErrorCode::invalid_argument, "arch: zero channels");
  require(spec.dropout >= 0 && spec.dropout < 1, ErrorCode::invalid_argument, "arch: dropout outside [0, 1)");
  require(spec.item_shape.size() == 4 && spec.item_shape[0] == 1, ErrorCode::invalid_argument,
          "arch: item shape must be [1, D, H, W]");
}

Model finish(const ArchSpec& spec, std::unique_ptr<Sequential> net) {
  net->add(classifier_head(spec.channels.back(), spec.dropout));
  return Model(format_arch(spec), spec.item_shape, std::move(net));
}

}  // namespace

std::string_view to_string(Family f) { return f == Family::reduction ? "reduction" : "constant"; }
std::string_view to_string(Downsample d) { return d == Downsample::conv ? "conv" : "max"; }

Family parse_family(std::string_view text) {
  if (text == "reduction") return Family::reduction;
  if (text == "constant") return Family::constant;
  fail(ErrorCode::parse_error, "unknown architecture family '" + std::string(text) + "'");
}

Downsample parse_downsample(std::string_view text) {
  if (text == "conv") return Downsample::conv;
  if (text == "max" || text == "maxpool") return Downsample::maxpool;
  fail(ErrorCode::parse_error, "unknown downsampling mode '" + std::string(text) + "'");
}

ArchSpec default_spec(Family family, Downsample downsample, Shape item_shape) {
  ArchSpec s;
  s.family = family;
  s.downsample = downsample;
  s.channels = family == Family::reduction ? std::vector<std::size_t>{4, 4, 24, 112, 160}
                                           : std::vector<std::size_t>{4, 4, 24, 128, 128};
  s.item_shape = std::move(item_shape);
  return s;
}

Model build_reduction(const ArchSpec& spec) {
  check_spec(spec, Family::reduction, 5);
  const auto& c = spec.channels;
  auto net = std::make_unique<Sequential>("reduction");
  std::size_t in = spec.item_shape[0];
  for (std::size_t i = 0; i < 2; ++i) {
    net->add(feature_first("reduction" + std::to_string(i + 1), spec.downsample, in, c[i], {1, 1, 7},
                           {1, 1, 4}));
    in = c[i];
  }
  for (std::size_t i = 2; i < 5; ++i) {
    net->add(feature_first("feature" + std::to_string(i - 1), spec.downsample, in, c[i], {3, 3, 3},
                           {2, 2, 2}));
    in = c[i];
  }
  return finish(spec, std::move(net));
}

Model build_constant(const ArchSpec& spec) {
  check_spec(spec, Family::constant, 5);
  const auto& c = spec.channels;
  static constexpr Triple kStrides[4] = {{1, 1, 4}, {1, 1, 4}, {1, 1, 2}, {2, 2, 1}};
  auto net = std::make_unique<Sequential>("constant");
  std::size_t in = spec.item_shape[0];
  for (std::size_t i = 0; i < 4; ++i) {
    net->add(down_first("constant" + std::to_string(i + 1), spec.downsample, in, c[i], {3, 3, 9},
                        kStrides[i]));
    in = c[i];
  }
  net->add(down_first("feature1", spec.downsample, in, c[4], {3, 3, 3}, {2, 2, 2}));
  return finish(spec, std::move(net));
}

Model build(const ArchSpec& spec) {
  return spec.family == Family::reduction ? build_reduction(spec) : build_constant(spec);
}

Shape parse_extents(std::string_view text) {
  Shape out;
  while (true) {
    const auto comma = text.find(',');
    const auto part = text.substr(0, comma);
    std::size_t v = 0;
    const auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    require(ec == std::errc() && p == part.data() + part.size() && !part.empty(), ErrorCode::parse_error,
            "bad extent list '" + std::string(text) + "'");
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    text = text.substr(comma + 1);
  }
  return out;
}

std::string format_extents(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out;
}

std::string format_arch(const ArchSpec& spec) {
  std::ostringstream os;
  os << "arch family=" << to_string(spec.family) << " downsample=" << to_string(spec.downsample)
     << " channels=" << format_extents(spec.channels) << " dropout=" << spec.dropout
     << " input=" << format_extents(spec.item_shape);
  return os.str();
}

ArchSpec parse_arch(std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string word;
  is >> word;
  require(word == "arch", ErrorCode::parse_error, "arch descriptor must start with 'arch'");
  ArchSpec spec;
  bool seen[5] = {};
  while (is >> word) {
    const auto eq = word.find('=');
    require(eq != std::string::npos, ErrorCode::parse_error, "arch descriptor: expected key=value, got '" + word + "'");
    const auto key = word.substr(0, eq);
    const std::string_view value = std::string_view(word).substr(eq + 1);
    if (key == "family") {
      spec.family = parse_family(value), seen[0] = true;
    } else if (key == "downsample") {
      spec.downsample = parse_downsample(value), seen[1] = true;
    } else if (key == "channels") {
      spec.channels = parse_extents(value), seen[2] = true;
    } else if (key == "dropout") {
      const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), spec.dropout);
      require(ec == std::errc() && p == value.data() + value.size(), ErrorCode::parse_error,
              "arch descriptor: bad dropout '" + std::string(value) + "'");
      seen[3] = true;
    } else if (key == "input") {
      spec.item_shape = parse_extents(value), seen[4] = true;
    } else {
      fail(ErrorCode::parse_error, "arch descriptor: unknown key '" + key + "'");
    }
  }
  for (bool s : seen) require(s, ErrorCode::parse_error, "arch descriptor: missing field");
  return spec;
}

}  // namespace utnas::model

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
#include "utnas/nas/genome.hpp"

#include <charconv>
#include <sstream>

#include "utnas/common/error.hpp"
#include "utnas/model/architectures.hpp"

namespace utnas::nas {

namespace {

using model::Sequential;

bool valid_kernel(std::size_t k) { return k == 3 || k == 5 || k == 7; }

std::size_t parse_number(std::string_view s, std::string_view token) {
  std::size_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && p == s.data() + s.size() && !s.empty(), ErrorCode::parse_error,
          "op token '" + std::string(token) + "': bad number");
  return v;
}

void add_op(Sequential& s, const PrimitiveOp& op, std::size_t c) {
  const auto pad = num::same_padding(op.kernel, op.dilation);
  switch (op.kind) {
    case OpKind::skip: return;
    case OpKind::depthwise:
    case OpKind::pointwise: {
      model::ConvSpec spec;
      spec.in = spec.out = c;
      spec.kernel = {op.kernel, op.kernel, op.kernel};
      spec.dilation = {op.dilation, op.dilation, op.dilation};
      spec.padding = {pad, pad, pad};
      spec.groups = op.kind == OpKind::depthwise ? c : 1;
      spec.bias = !op.norm;
      s.emplace<model::Conv3d>(spec);
      break;
    }
    case OpKind::avg_pool:
    case OpKind::max_pool:
      s.emplace<model::Pool3d>(op.kind == OpKind::avg_pool ? num::PoolKind::avg : num::PoolKind::max,
                               num::Pool3dOptions{{op.kernel, op.kernel, op.kernel},
                                                  {1, 1, 1},
                                                  {1, 1, 1},
                                                  {pad, pad, pad}});
      break;
  }
  if (op.norm) s.emplace<model::BatchNorm>(c);
  if (op.gelu) s.emplace<model::Activation>(num::ActivationKind::gelu);
}

model::LayerPtr residual_block(const Block& b, const NasSpec& spec, std::size_t index) {
  auto body = std::make_unique<Sequential>("block" + std::to_string(index));
  model::ConvSpec down;
  down.in = spec.channels;
  down.out = spec.bottleneck;
  body->emplace<model::Conv3d>(down);
  body->emplace<model::BatchNorm>(spec.bottleneck);
  body->emplace<model::Activation>(num::ActivationKind::gelu);
  add_op(*body, b.op1, spec.bottleneck);
  add_op(*body, b.op2, spec.bottleneck);
  model::ConvSpec up;
  up.in = spec.bottleneck;
  up.out = spec.channels;
  up.bias = true;
  body->emplace<model::Conv3d>(up);
  return std::make_unique<model::Residual>(std::move(body));
}

}  // namespace

const std::vector<PrimitiveOp>& legal_ops() {
  static const std::vector<PrimitiveOp> ops = [] {
    std::vector<PrimitiveOp> out;
    const bool flags[4][2] = {{false, false}, {true, false}, {false, true}, {true, true}};
    for (std::size_t k : {3, 5, 7})
      for (std::size_t d = 1; d <= 4; ++d)
        for (const auto& f : flags) out.push_back({OpKind::depthwise, k, d, f[0], f[1]});
    for (const auto& f : flags) out.push_back({OpKind::pointwise, 1, 1, f[0], f[1]});
    out.push_back({OpKind::skip, 1, 1, false, false});
    for (auto kind : {OpKind::avg_pool, OpKind::max_pool})
      for (std::size_t k : {3, 5, 7})
        for (const auto& f : flags) out.push_back({kind, k, 1, f[0], f[1]});
    return out;
  }();
  return ops;
}

void validate(const PrimitiveOp& op) {
  switch (op.kind) {
    case OpKind::depthwise:
      require(valid_kernel(op.kernel) && op.dilation >= 1 && op.dilation <= 4, ErrorCode::invalid_argument,
              "depthwise op needs kernel 3, 5 or 7 and dilation 1..4");
      break;
    case OpKind::pointwise:
      require(op.kernel == 1 && op.dilation == 1, ErrorCode::invalid_argument, "pointwise op is 1x1x1");
      break;
    case OpKind::skip:
      require(op.kernel == 1 && op.dilation == 1 && !op.norm && !op.gelu, ErrorCode::invalid_argument,
              "skip op takes no options");
      break;
    case OpKind::avg_pool:
    case OpKind::max_pool:
      require(valid_kernel(op.kernel) && op.dilation == 1, ErrorCode::invalid_argument,
              "pool op needs kernel 3, 5 or 7 and dilation 1");
      break;
  }
}

std::string format_op(const PrimitiveOp& op) {
  validate(op);
  std::string s;
  switch (op.kind) {
    case OpKind::depthwise: s = "dw" + std::to_string(op.kernel) + "d" + std::to_string(op.dilation); break;
    case OpKind::pointwise: s = "pw"; break;
    case OpKind::skip: return "skip";
    case OpKind::avg_pool: s = "ap" + std::to_string(op.kernel); break;
    case OpKind::max_pool: s = "mp" + std::to_string(op.kernel); break;
  }
  if (op.norm) s += "+bn";
  if (op.gelu) s += "+gelu";
  return s;
}

PrimitiveOp parse_op(std::string_view token) {
  PrimitiveOp op;
  if (token == "skip") return op;
  std::string_view head = token.substr(0, token.find('+'));
  std::string_view rest = head.size() < token.size() ? token.substr(head.size()) : std::string_view{};
  if (rest == "+bn") {
    op.norm = true;
  } else if (rest == "+gelu") {
    op.gelu = true;
  } else if (rest == "+bn+gelu") {
    op.norm = op.gelu = true;
  } else {
    require(rest.empty(), ErrorCode::parse_error, "op token '" + std::string(token) + "': bad suffix");
  }
  if (head == "pw") {
    op.kind = OpKind::pointwise;
  } else if (head.starts_with("dw")) {
    op.kind = OpKind::depthwise;
    const auto d = head.find('d', 2);
    require(d != std::string_view::npos, ErrorCode::parse_error,
            "op token '" + std::string(token) + "': missing dilation");
    op.kernel = parse_number(head.substr(2, d - 2), token);
    op.dilation = parse_number(head.substr(d + 1), token);
  } else if (head.starts_with("ap") || head.starts_with("mp")) {
    op.kind = head[0] == 'a' ? OpKind::avg_pool : OpKind::max_pool;
    op.kernel = parse_number(head.substr(2), token);
  } else {
    fail(ErrorCode::parse_error, "unknown op token '" + std::string(token) + "'");
  }
  try {
    validate(op);
  } catch (const Error& e) {
    fail(ErrorCode::parse_error, "op token '" + std::string(token) + "': " + e.what());
  }
  return op;
}

std::vector<std::size_t> Genome::group_sizes() const {
  std::vector<std::size_t> sizes;
  for (const auto& b : blocks) {
    if (b.group == sizes.size()) sizes.push_back(0);
    ++sizes.back();
  }
  return sizes;
}

void validate(const Genome& g) {
  require(g.blocks.size() >= kMinBlocks && g.blocks.size() <= kMaxBlocks, ErrorCode::invalid_argument,
          "genome: needs 2 to 4 residual blocks, has " + std::to_string(g.blocks.size()));
  for (std::size_t i = 0; i < g.blocks.size(); ++i) {
    const auto& b = g.blocks[i];
    const std::size_t prev = i == 0 ? 0 : g.blocks[i - 1].group;
    require(i == 0 ? b.group == 0 : (b.group == prev || b.group == prev + 1), ErrorCode::invalid_argument,
            "genome: block " + std::to_string(i) + " group " + std::to_string(b.group) +
                " does not continue the ordered partition");
    validate(b.op1);
    validate(b.op2);
  }
}

Genome sample_genome(Rng& rng) {
  const auto& ops = legal_ops();
  const auto pick = [&] { return ops[static_cast<std::size_t>(rng.uniform_int(0, std::int64_t(ops.size()) - 1))]; };
  Genome g;
  const auto n = static_cast<std::size_t>(rng.uniform_int(kMinBlocks, kMaxBlocks));
  std::size_t group = 0, size = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && rng.bernoulli(new_group_probability(size))) ++group, size = 0;
    ++size;
    Block b;
    b.group = group;
    b.op1 = pick();
    b.op2 = pick();
    g.blocks.push_back(b);
  }
  return g;
}

std::string serialize_genome(const Genome& g) {
  validate(g);
  std::string s = "genome v1 blocks=" + std::to_string(g.blocks.size()) + "\n";
  for (const auto& b : g.blocks)
    s += "block group=" + std::to_string(b.group) + " op1=" + format_op(b.op1) + " op2=" + format_op(b.op2) + "\n";
  return s;
}

Genome parse_genome(std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string line;
  std::size_t line_no = 0, expected = 0;
  Genome g;
  auto error = [&](const std::string& what) {
    fail(ErrorCode::parse_error, "genome line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<std::string> words;
    for (std::string w; ls >> w;) words.push_back(w);
    if (line_no == 1) {
      if (words.size() != 3 || words[0] != "genome" || words[1] != "v1" || !words[2].starts_with("blocks="))
        error("expected 'genome v1 blocks=<n>'");
      try {
        expected = parse_number(std::string_view(words[2]).substr(7), words[2]);
      } catch (const Error&) {
        error("bad block count");
      }
      continue;
    }
    if (words.size() != 4 || words[0] != "block" || !words[1].starts_with("group=") ||
        !words[2].starts_with("op1=") || !words[3].starts_with("op2="))
      error("expected 'block group=<g> op1=<tok> op2=<tok>'");
    try {
      Block b;
      b.group = parse_number(std::string_view(words[1]).substr(6), words[1]);
      b.op1 = parse_op(std::string_view(words[2]).substr(4));
      b.op2 = parse_op(std::string_view(words[3]).substr(4));
      g.blocks.push_back(b);
    } catch (const Error& e) {
      error(e.what());
    }
  }
  if (line_no == 0) error("empty genome");
  if (g.blocks.size() != expected)
    fail(ErrorCode::parse_error, "genome: header declares " + std::to_string(expected) + " blocks, found " +
                                     std::to_string(g.blocks.size()));
  try {
    validate(g);
  } catch (const Error& e) {
    fail(ErrorCode::parse_error, e.what());
  }
  return g;
}

model::Model instantiate(const Genome& g, const NasSpec& spec) {
  validate(g);
  require(spec.item_shape.size() == 4 && spec.item_shape[0] == 1, ErrorCode::invalid_argument,
          "nas: item shape must be [1, D, H, W]");
  auto net = std::make_unique<Sequential>("nas");
  auto stem = std::make_unique<Sequential>("stem");
  model::ConvSpec c1;
  c1.in = 1;
  c1.out = 32;
  c1.kernel = c1.stride = {2, 2, 4};
  stem->emplace<model::Conv3d>(c1);
  stem->emplace<model::BatchNorm>(32);
  stem->emplace<model::Activation>(num::ActivationKind::gelu);
  model::ConvSpec c2;
  c2.in = 32;
  c2.out = spec.channels;
  c2.kernel = c2.stride = {2, 2, 2};
  c2.bias = true;
  stem->emplace<model::Conv3d>(c2);
  net->add(std::move(stem));
  net->emplace<model::ClampedAvgPool>(model::Triple{2, 2, 4});

  model::Shape shape = {1};
  shape.insert(shape.end(), spec.item_shape.begin(), spec.item_shape.end());
  try {
    shape = net->output_shape(shape);
  } catch (const Error& e) {
    fail(ErrorCode::shape_mismatch, std::string("nas stem: ") + e.what());
  }
  std::size_t group = 0;
  for (std::size_t i = 0; i < g.blocks.size(); ++i) {
    if (g.blocks[i].group != group) {
      group = g.blocks[i].group;
      auto pool = std::make_unique<model::ClampedAvgPool>(model::Triple{2, 2, 4});
      try {
        shape = pool->output_shape(shape);
      } catch (const Error& e) {
        fail(ErrorCode::shape_mismatch, "nas group " + std::to_string(group) + ": " + e.what());
      }
      net->add(std::move(pool));
    }
    net->add(residual_block(g.blocks[i], spec, i));
  }
  net->add(model::classifier_head(spec.channels, spec.dropout));
  return model::Model(format_nas_descriptor(g, spec), spec.item_shape, std::move(net));
}

std::string format_nas_descriptor(const Genome& g, const NasSpec& spec) {
  std::ostringstream os;
  os << "nas input=" << model::format_extents(spec.item_shape) << " channels=" << spec.channels
     << " bottleneck=" << spec.bottleneck << " dropout=" << spec.dropout << "\n"
     << serialize_genome(g);
  return os.str();
}

model::Model instantiate_descriptor(std::string_view descriptor) {
  const auto eol = descriptor.find('\n');
  require(eol != std::string_view::npos, ErrorCode::parse_error, "nas descriptor: missing genome");
  std::istringstream is{std::string(descriptor.substr(0, eol))};
  std::string word;
  is >> word;
  require(word == "nas", ErrorCode::parse_error, "nas descriptor must start with 'nas'");
  NasSpec spec;
  while (is >> word) {
    const auto eq = word.find('=');
    require(eq != std::string::npos, ErrorCode::parse_error, "nas descriptor: expected key=value");
    const auto key = word.substr(0, eq);
    const std::string_view value = std::string_view(word).substr(eq + 1);
    if (key == "input") {
      spec.item_shape = model::parse_extents(value);
    } else if (key == "channels") {
      spec.channels = parse_number(value, word);
    } else if (key == "bottleneck") {
      spec.bottleneck = parse_number(value, word);
    } else if (key == "dropout") {
      const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), spec.dropout);
      require(ec == std::errc() && p == value.data() + value.size(), ErrorCode::parse_error,
              "nas descriptor: bad dropout");
    } else {
      fail(ErrorCode::parse_error, "nas descriptor: unknown key '" + key + "'");
    }
  }
  return instantiate(parse_genome(descriptor.substr(eol + 1)), spec);
}

}  // namespace utnas::nas

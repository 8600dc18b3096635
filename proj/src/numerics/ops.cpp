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
#include "utnas/numerics/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "utnas/common/error.hpp"

namespace utnas::num {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

// Upper bound on im2col buffer elements; larger problems are processed in
// chunks of whole output lines.
constexpr std::size_t kColumnBudget = std::size_t{1} << 22;

void require_rank(const Shape& shape, std::size_t rank, const char* op) {
  require(shape.size() == rank, ErrorCode::shape_mismatch,
          std::string(op) + ": expected rank " + std::to_string(rank) + " input, got " +
              to_string(shape));
}

// Valid output range [lo, hi) along one axis for a kernel tap at `offset`
// (input index = out * stride + offset).
struct TapRange {
  std::size_t lo;
  std::size_t hi;
};

TapRange tap_range(std::ptrdiff_t offset, std::size_t stride, std::size_t in_extent,
                   std::size_t out_extent) {
  const auto s = static_cast<std::ptrdiff_t>(stride);
  const auto in = static_cast<std::ptrdiff_t>(in_extent);
  std::ptrdiff_t lo = offset >= 0 ? 0 : (-offset + s - 1) / s;
  std::ptrdiff_t last = in - 1 - offset;
  std::ptrdiff_t hi = last < 0 ? 0 : last / s + 1;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out_extent));
  lo = std::min(lo, hi);
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

struct ConvGeometry {
  std::size_t batch = 0, cin = 0, cout = 0, groups = 1, cin_g = 0, cout_g = 0;
  Triple in{}, out{}, kernel{}, stride{}, dilation{}, padding{};
  std::size_t in_vox = 0, out_vox = 0, kvol = 0, rows = 0, lines = 0, lines_per_chunk = 1;
  bool direct = false;
};

ConvGeometry conv_geometry(const Shape& in, const Shape& w, const Conv3dOptions& o) {
  require_rank(in, 5, "conv3d");
  require(w.size() == 5, ErrorCode::shape_mismatch,
          "conv3d: weights must be [Cout, Cin/groups, kD, kH, kW], got " + to_string(w));
  ConvGeometry g;
  g.batch = in[0];
  g.cin = in[1];
  g.cout = w[0];
  g.groups = o.groups;
  require(g.groups >= 1 && g.cin % g.groups == 0, ErrorCode::shape_mismatch,
          "conv3d: channel axis: " + std::to_string(g.cin) + " input channels not divisible by " +
              std::to_string(g.groups) + " groups");
  require(g.cout % g.groups == 0, ErrorCode::shape_mismatch,
          "conv3d: channel axis: " + std::to_string(g.cout) +
              " output channels not divisible by groups");
  g.cin_g = g.cin / g.groups;
  g.cout_g = g.cout / g.groups;
  require(w[1] == g.cin_g, ErrorCode::shape_mismatch,
          "conv3d: channel axis: weights expect " + std::to_string(w[1]) +
              " channels per group, input provides " + std::to_string(g.cin_g));
  g.kernel = {w[2], w[3], w[4]};
  g.stride = o.stride;
  g.dilation = o.dilation;
  g.padding = o.padding;
  g.in = {in[2], in[3], in[4]};
  g.out = window_output(in, g.kernel, g.stride, g.dilation, g.padding, "conv3d");
  g.in_vox = g.in[0] * g.in[1] * g.in[2];
  g.out_vox = g.out[0] * g.out[1] * g.out[2];
  g.kvol = g.kernel[0] * g.kernel[1] * g.kernel[2];
  g.rows = g.cin_g * g.kvol;
  g.lines = g.out[0] * g.out[1];
  g.direct = g.kvol == 1 && g.stride == Triple{1, 1, 1} && g.padding == Triple{0, 0, 0};
  g.lines_per_chunk = std::max<std::size_t>(1, kColumnBudget / std::max<std::size_t>(1, g.rows * g.out[2]));
  g.lines_per_chunk = std::min(g.lines_per_chunk, g.lines);
  return g;
}

// Gathers (or, with Accumulate, scatters back) the receptive fields of output
// lines [line0, line1) for one group of input channels. col is row-major
// [rows, (line1-line0)*Wout].
template <bool Scatter, typename T>
void im2col_lines(const ConvGeometry& g, const T* in, T* in_mut, std::size_t line0,
                  std::size_t line1, T* col, const T* col_src) {
  const std::size_t ncols = (line1 - line0) * g.out[2];
  const auto [kd_n, kh_n, kw_n] = g.kernel;
  for (std::size_t ci = 0; ci < g.cin_g; ++ci) {
    for (std::size_t kd = 0; kd < kd_n; ++kd) {
      for (std::size_t kh = 0; kh < kh_n; ++kh) {
        for (std::size_t kw = 0; kw < kw_n; ++kw) {
          const std::size_t r = ((ci * kd_n + kd) * kh_n + kh) * kw_n + kw;
          const auto ow_off = static_cast<std::ptrdiff_t>(kw * g.dilation[2]) -
                              static_cast<std::ptrdiff_t>(g.padding[2]);
          const auto range = tap_range(ow_off, g.stride[2], g.in[2], g.out[2]);
          for (std::size_t l = line0; l < line1; ++l) {
            const std::size_t od = l / g.out[1];
            const std::size_t oh = l % g.out[1];
            const auto id = static_cast<std::ptrdiff_t>(od * g.stride[0] + kd * g.dilation[0]) -
                            static_cast<std::ptrdiff_t>(g.padding[0]);
            const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride[1] + kh * g.dilation[1]) -
                            static_cast<std::ptrdiff_t>(g.padding[1]);
            const std::size_t col_off = r * ncols + (l - line0) * g.out[2];
            const bool inside = id >= 0 && id < static_cast<std::ptrdiff_t>(g.in[0]) && ih >= 0 &&
                                ih < static_cast<std::ptrdiff_t>(g.in[1]);
            if constexpr (!Scatter) {
              T* dst = col + col_off;
              if (!inside) {
                std::fill(dst, dst + g.out[2], T(0));
                continue;
              }
              const T* src = in + ci * g.in_vox +
                             (static_cast<std::size_t>(id) * g.in[1] + static_cast<std::size_t>(ih)) * g.in[2];
              std::fill(dst, dst + range.lo, T(0));
              for (std::size_t ow = range.lo; ow < range.hi; ++ow)
                dst[ow] = src[static_cast<std::ptrdiff_t>(ow * g.stride[2]) + ow_off];
              std::fill(dst + range.hi, dst + g.out[2], T(0));
            } else {
              if (!inside) continue;
              const T* src = col_src + col_off;
              T* dst = in_mut + ci * g.in_vox +
                       (static_cast<std::size_t>(id) * g.in[1] + static_cast<std::size_t>(ih)) * g.in[2];
              for (std::size_t ow = range.lo; ow < range.hi; ++ow)
                dst[static_cast<std::ptrdiff_t>(ow * g.stride[2]) + ow_off] += src[ow];
            }
          }
        }
      }
    }
  }
}

template <typename T>
T sigmoid_scalar(T x) {
  if (x >= T(0)) {
    const T z = std::exp(-x);
    return T(1) / (T(1) + z);
  }
  const T z = std::exp(x);
  return z / (T(1) + z);
}

}  // namespace

const char* axis_name(std::size_t axis) {
  static constexpr const char* kNames[] = {"batch", "channel", "scan", "array", "time"};
  return axis < 5 ? kNames[axis] : "extra";
}

std::optional<std::size_t> conv_output_extent(std::size_t in, std::size_t kernel,
                                              std::size_t stride, std::size_t dilation,
                                              std::size_t padding) {
  if (kernel == 0 || stride == 0 || dilation == 0) return std::nullopt;
  const std::size_t span = dilation * (kernel - 1) + 1;
  const std::size_t padded = in + 2 * padding;
  if (span > padded) return std::nullopt;
  return (padded - span) / stride + 1;
}

Triple window_output(const Shape& input, const Triple& kernel, const Triple& stride,
                     const Triple& dilation, const Triple& padding, const char* op) {
  require(input.size() == 5, ErrorCode::shape_mismatch,
          std::string(op) + ": expected [B, C, D, H, W] input, got " + to_string(input));
  Triple out{};
  for (std::size_t a = 0; a < 3; ++a) {
    const auto e = conv_output_extent(input[a + 2], kernel[a], stride[a], dilation[a], padding[a]);
    require(e.has_value(), ErrorCode::shape_mismatch,
            std::string(op) + ": " + axis_name(a + 2) + " axis: kernel " +
                std::to_string(kernel[a]) + " (dilation " + std::to_string(dilation[a]) +
                ") does not fit extent " + std::to_string(input[a + 2]) + " with padding " +
                std::to_string(padding[a]));
    out[a] = *e;
  }
  return out;
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), ErrorCode::shape_mismatch,
          "add: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) + " differ");
  std::vector<T> out(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, [](detail::Node<T>& n) {
    for (auto& in : n.inputs) {
      if (!in->requires_grad) continue;
      auto& g = in->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), ErrorCode::shape_mismatch,
          "mul: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) + " differ");
  std::vector<T> out(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, [](detail::Node<T>& n) {
    auto& x = *n.inputs[0];
    auto& y = *n.inputs[1];
    if (x.requires_grad) {
      auto& g = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * y.value[i];
    }
    if (y.requires_grad) {
      auto& g = y.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * x.value[i];
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = 0;
  for (auto v : a.values()) total += v;
  return make_result<T>({1}, {total}, {a}, [](detail::Node<T>& n) {
    auto& g = n.inputs[0]->grad_buffer();
    for (auto& v : g) v += n.grad[0];
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  require(numel(shape) == a.size(), ErrorCode::shape_mismatch,
          "reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  std::vector<T> out(a.values().begin(), a.values().end());
  return make_result<T>(std::move(shape), std::move(out), {a}, [](detail::Node<T>& n) {
    auto& g = n.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  });
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> conv3d(const Tensor<T>& input, const Tensor<T>& weights,
                 const std::optional<NoDeduce<Tensor<T>>>& bias, const Conv3dOptions& options) {
  const ConvGeometry g = conv_geometry(input.shape(), weights.shape(), options);
  if (bias) {
    require(bias->size() == g.cout, ErrorCode::shape_mismatch,
            "conv3d: channel axis: bias has " + std::to_string(bias->size()) + " entries for " +
                std::to_string(g.cout) + " output channels");
  }

  std::vector<T> out(g.batch * g.cout * g.out_vox);
  std::vector<T> col(g.direct ? 0 : g.rows * g.lines_per_chunk * g.out[2]);
  const T* x = input.values().data();
  const T* w = weights.values().data();

  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t grp = 0; grp < g.groups; ++grp) {
      const T* xg = x + (b * g.cin + grp * g.cin_g) * g.in_vox;
      ConstMatMap<T> wg(w + grp * g.cout_g * g.rows, g.cout_g, g.rows, Eigen::OuterStride<>(g.rows));
      for (std::size_t l0 = 0; l0 < g.lines; l0 += g.lines_per_chunk) {
        const std::size_t l1 = std::min(g.lines, l0 + g.lines_per_chunk);
        const std::size_t ncols = (l1 - l0) * g.out[2];
        MatMap<T> om(out.data() + (b * g.cout + grp * g.cout_g) * g.out_vox + l0 * g.out[2],
                     g.cout_g, ncols, Eigen::OuterStride<>(g.out_vox));
        if (g.direct) {
          ConstMatMap<T> cm(xg + l0 * g.out[2], g.rows, ncols, Eigen::OuterStride<>(g.in_vox));
          om.noalias() = wg * cm;
        } else {
          im2col_lines<false>(g, xg, static_cast<T*>(nullptr), l0, l1, col.data(),
                              static_cast<const T*>(nullptr));
          ConstMatMap<T> cm(col.data(), g.rows, ncols, Eigen::OuterStride<>(ncols));
          om.noalias() = wg * cm;
        }
      }
    }
  }
  if (bias) {
    const auto bv = bias->values();
    for (std::size_t b = 0; b < g.batch; ++b)
      for (std::size_t c = 0; c < g.cout; ++c) {
        T* o = out.data() + (b * g.cout + c) * g.out_vox;
        for (std::size_t i = 0; i < g.out_vox; ++i) o[i] += bv[c];
      }
  }

  std::vector<Tensor<T>> inputs{input, weights};
  if (bias) inputs.push_back(*bias);
  Shape out_shape{g.batch, g.cout, g.out[0], g.out[1], g.out[2]};
  return make_result<T>(std::move(out_shape), std::move(out), std::move(inputs),
                        [g](detail::Node<T>& n) {
    auto& xin = *n.inputs[0];
    auto& win = *n.inputs[1];
    const bool need_x = xin.requires_grad;
    const bool need_w = win.requires_grad;
    const T* gout = n.grad.data();
    T* gx = need_x ? xin.grad_buffer().data() : nullptr;
    T* gw = need_w ? win.grad_buffer().data() : nullptr;
    std::vector<T> col(g.direct ? 0 : g.rows * g.lines_per_chunk * g.out[2]);
    std::vector<T> dcol(need_x && !g.direct ? col.size() : 0);

    for (std::size_t b = 0; b < g.batch; ++b) {
      for (std::size_t grp = 0; grp < g.groups; ++grp) {
        const std::size_t x_off = (b * g.cin + grp * g.cin_g) * g.in_vox;
        const T* xg = xin.value.data() + x_off;
        ConstMatMap<T> wg(win.value.data() + grp * g.cout_g * g.rows, g.cout_g, g.rows,
                          Eigen::OuterStride<>(g.rows));
        for (std::size_t l0 = 0; l0 < g.lines; l0 += g.lines_per_chunk) {
          const std::size_t l1 = std::min(g.lines, l0 + g.lines_per_chunk);
          const std::size_t ncols = (l1 - l0) * g.out[2];
          ConstMatMap<T> gm(gout + (b * g.cout + grp * g.cout_g) * g.out_vox + l0 * g.out[2],
                            g.cout_g, ncols, Eigen::OuterStride<>(g.out_vox));
          if (need_w) {
            MatMap<T> gwm(gw + grp * g.cout_g * g.rows, g.cout_g, g.rows, Eigen::OuterStride<>(g.rows));
            if (g.direct) {
              ConstMatMap<T> cm(xg + l0 * g.out[2], g.rows, ncols, Eigen::OuterStride<>(g.in_vox));
              gwm.noalias() += gm * cm.transpose();
            } else {
              im2col_lines<false>(g, xg, static_cast<T*>(nullptr), l0, l1, col.data(),
                                  static_cast<const T*>(nullptr));
              ConstMatMap<T> cm(col.data(), g.rows, ncols, Eigen::OuterStride<>(ncols));
              gwm.noalias() += gm * cm.transpose();
            }
          }
          if (need_x) {
            if (g.direct) {
              MatMap<T> gxm(gx + x_off + l0 * g.out[2], g.rows, ncols, Eigen::OuterStride<>(g.in_vox));
              gxm.noalias() += wg.transpose() * gm;
            } else {
              MatMap<T> dm(dcol.data(), g.rows, ncols, Eigen::OuterStride<>(ncols));
              dm.noalias() = wg.transpose() * gm;
              im2col_lines<true>(g, static_cast<const T*>(nullptr), gx + x_off, l0, l1,
                                 static_cast<T*>(nullptr), dcol.data());
            }
          }
        }
      }
    }
    if (n.inputs.size() > 2 && n.inputs[2]->requires_grad) {
      auto& gb = n.inputs[2]->grad_buffer();
      for (std::size_t b = 0; b < g.batch; ++b)
        for (std::size_t c = 0; c < g.cout; ++c) {
          const T* o = gout + (b * g.cout + c) * g.out_vox;
          T acc = 0;
          for (std::size_t i = 0; i < g.out_vox; ++i) acc += o[i];
          gb[c] += acc;
        }
    }
  });
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> pool3d(PoolKind kind, const Tensor<T>& input, const Pool3dOptions& o) {
  const Shape& s = input.shape();
  const Triple out = window_output(s, o.kernel, o.stride, o.dilation, o.padding, "pool3d");
  const std::size_t planes = s[0] * s[1];
  const Triple in{s[2], s[3], s[4]};
  const std::size_t in_vox = in[0] * in[1] * in[2];
  const std::size_t out_vox = out[0] * out[1] * out[2];
  const std::size_t window = o.kernel[0] * o.kernel[1] * o.kernel[2];
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  std::vector<T> result(planes * out_vox);
  std::vector<std::size_t> argmax(kind == PoolKind::max ? result.size() : 0, kNone);
  const T* x = input.values().data();

  const Pool3dOptions opts = o;
  auto offset = [opts](std::size_t o_idx, std::size_t k, std::size_t axis) {
    return static_cast<std::ptrdiff_t>(o_idx * opts.stride[axis] + k * opts.dilation[axis]) -
           static_cast<std::ptrdiff_t>(opts.padding[axis]);
  };

  for (std::size_t p = 0; p < planes; ++p) {
    const T* xp = x + p * in_vox;
    for (std::size_t od = 0; od < out[0]; ++od)
      for (std::size_t oh = 0; oh < out[1]; ++oh)
        for (std::size_t ow = 0; ow < out[2]; ++ow) {
          const std::size_t oi = p * out_vox + (od * out[1] + oh) * out[2] + ow;
          T best = -std::numeric_limits<T>::infinity();
          std::size_t best_idx = kNone;
          T acc = 0;
          for (std::size_t kd = 0; kd < o.kernel[0]; ++kd) {
            const auto id = offset(od, kd, 0);
            if (id < 0 || id >= static_cast<std::ptrdiff_t>(in[0])) continue;
            for (std::size_t kh = 0; kh < o.kernel[1]; ++kh) {
              const auto ih = offset(oh, kh, 1);
              if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(in[1])) continue;
              for (std::size_t kw = 0; kw < o.kernel[2]; ++kw) {
                const auto iw = offset(ow, kw, 2);
                if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(in[2])) continue;
                const std::size_t ii = (static_cast<std::size_t>(id) * in[1] +
                                        static_cast<std::size_t>(ih)) * in[2] +
                                       static_cast<std::size_t>(iw);
                const T v = xp[ii];
                if (kind == PoolKind::max) {
                  if (best_idx == kNone || v > best) {
                    best = v;
                    best_idx = ii;
                  }
                } else {
                  acc += v;
                }
              }
            }
          }
          if (kind == PoolKind::max) {
            result[oi] = best_idx == kNone ? T(0) : best;
            argmax[oi] = best_idx;
          } else {
            result[oi] = acc / static_cast<T>(window);
          }
        }
  }

  Shape out_shape{s[0], s[1], out[0], out[1], out[2]};
  return make_result<T>(std::move(out_shape), std::move(result), {input},
                        [=, argmax = std::move(argmax)](detail::Node<T>& n) {
    auto& gx = n.inputs[0]->grad_buffer();
    const T inv = T(1) / static_cast<T>(window);
    for (std::size_t p = 0; p < planes; ++p) {
      T* gp = gx.data() + p * in_vox;
      for (std::size_t od = 0; od < out[0]; ++od)
        for (std::size_t oh = 0; oh < out[1]; ++oh)
          for (std::size_t ow = 0; ow < out[2]; ++ow) {
            const std::size_t oi = p * out_vox + (od * out[1] + oh) * out[2] + ow;
            const T go = n.grad[oi];
            if (kind == PoolKind::max) {
              if (argmax[oi] != kNone) gp[argmax[oi]] += go;
              continue;
            }
            for (std::size_t kd = 0; kd < opts.kernel[0]; ++kd) {
              const auto id = offset(od, kd, 0);
              if (id < 0 || id >= static_cast<std::ptrdiff_t>(in[0])) continue;
              for (std::size_t kh = 0; kh < opts.kernel[1]; ++kh) {
                const auto ih = offset(oh, kh, 1);
                if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(in[1])) continue;
                for (std::size_t kw = 0; kw < opts.kernel[2]; ++kw) {
                  const auto iw = offset(ow, kw, 2);
                  if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(in[2])) continue;
                  gp[(static_cast<std::size_t>(id) * in[1] + static_cast<std::size_t>(ih)) * in[2] +
                     static_cast<std::size_t>(iw)] += go * inv;
                }
              }
            }
          }
    }
  });
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input) {
  require_rank(input.shape(), 5, "global_avg_pool");
  const Shape& s = input.shape();
  const std::size_t planes = s[0] * s[1];
  const std::size_t vox = s[2] * s[3] * s[4];
  require(vox > 0, ErrorCode::shape_mismatch, "global_avg_pool: empty spatial axes");
  std::vector<T> out(planes);
  const T* x = input.values().data();
  for (std::size_t p = 0; p < planes; ++p) {
    T acc = 0;
    for (std::size_t i = 0; i < vox; ++i) acc += x[p * vox + i];
    out[p] = acc / static_cast<T>(vox);
  }
  return make_result<T>({s[0], s[1]}, std::move(out), {input}, [planes, vox](detail::Node<T>& n) {
    auto& g = n.inputs[0]->grad_buffer();
    const T inv = T(1) / static_cast<T>(vox);
    for (std::size_t p = 0; p < planes; ++p) {
      const T v = n.grad[p] * inv;
      for (std::size_t i = 0; i < vox; ++i) g[p * vox + i] += v;
    }
  });
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                     std::span<NoDeduce<T>> running_mean, std::span<NoDeduce<T>> running_var, Mode mode,
                     NoDeduce<T> momentum, NoDeduce<T> epsilon) {
  const Shape& s = input.shape();
  require(s.size() >= 2, ErrorCode::shape_mismatch,
          "batch_norm: input needs a channel axis, got " + to_string(s));
  const std::size_t batch = s[0];
  const std::size_t channels = s[1];
  const std::size_t inner = numel(s) / std::max<std::size_t>(1, batch * channels);
  const std::size_t count = batch * inner;
  require(gamma.size() == channels && beta.size() == channels && running_mean.size() == channels &&
              running_var.size() == channels,
          ErrorCode::shape_mismatch,
          "batch_norm: channel axis: gain/shift/statistics must have " + std::to_string(channels) +
              " entries");
  require(mode == Mode::infer || count >= 2, ErrorCode::shape_mismatch,
          "batch_norm: train mode needs at least 2 values per channel, got " + std::to_string(count));

  const T* x = input.values().data();
  const auto gv = gamma.values();
  const auto bv = beta.values();
  std::vector<T> xhat(input.size());
  std::vector<T> inv_std(channels);
  std::vector<T> out(input.size());

  for (std::size_t c = 0; c < channels; ++c) {
    T mean;
    T var;
    if (mode == Mode::train) {
      T acc = 0;
      for (std::size_t b = 0; b < batch; ++b) {
        const T* xp = x + (b * channels + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) acc += xp[i];
      }
      mean = acc / static_cast<T>(count);
      T sq = 0;
      for (std::size_t b = 0; b < batch; ++b) {
        const T* xp = x + (b * channels + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) {
          const T d = xp[i] - mean;
          sq += d * d;
        }
      }
      var = sq / static_cast<T>(count);
      const T unbiased = sq / static_cast<T>(count - 1);
      running_mean[c] = (T(1) - momentum) * running_mean[c] + momentum * mean;
      running_var[c] = (T(1) - momentum) * running_var[c] + momentum * unbiased;
    } else {
      mean = running_mean[c];
      var = running_var[c];
    }
    const T is = T(1) / std::sqrt(var + epsilon);
    inv_std[c] = is;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const T h = (x[off + i] - mean) * is;
        xhat[off + i] = h;
        out[off + i] = gv[c] * h + bv[c];
      }
    }
  }

  return make_result<T>(s, std::move(out), {input, gamma, beta},
                        [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node<T>& n) {
    auto& xin = *n.inputs[0];
    auto& gin = *n.inputs[1];
    auto& bin = *n.inputs[2];
    const T* gy = n.grad.data();
    for (std::size_t c = 0; c < channels; ++c) {
      T sum_dy = 0;
      T sum_dy_xhat = 0;
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t off = (b * channels + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) {
          sum_dy += gy[off + i];
          sum_dy_xhat += gy[off + i] * xhat[off + i];
        }
      }
      if (gin.requires_grad) gin.grad_buffer()[c] += sum_dy_xhat;
      if (bin.requires_grad) bin.grad_buffer()[c] += sum_dy;
      if (!xin.requires_grad) continue;
      auto& gx = xin.grad_buffer();
      const T scale = gin.value[c] * inv_std[c];
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t off = (b * channels + c) * inner;
        if (mode == Mode::train) {
          const T k = scale / static_cast<T>(count);
          const T cnt = static_cast<T>(count);
          for (std::size_t i = 0; i < inner; ++i)
            gx[off + i] += k * (cnt * gy[off + i] - sum_dy - xhat[off + i] * sum_dy_xhat);
        } else {
          for (std::size_t i = 0; i < inner; ++i) gx[off + i] += scale * gy[off + i];
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> activation(ActivationKind kind, const Tensor<T>& input, NoDeduce<T> negative_slope) {
  const auto xv = input.values();
  std::vector<T> out(xv.size());
  switch (kind) {
    case ActivationKind::leaky_relu:
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = xv[i] > T(0) ? xv[i] : negative_slope * xv[i];
      break;
    case ActivationKind::gelu:
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = T(0.5) * xv[i] * (T(1) + std::erf(xv[i] / std::numbers::sqrt2_v<T>));
      break;
    case ActivationKind::sigmoid:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(xv[i]);
      break;
  }
  return make_result<T>(input.shape(), std::move(out), {input},
                        [kind, negative_slope](detail::Node<T>& n) {
    auto& in = *n.inputs[0];
    auto& g = in.grad_buffer();
    const T inv_sqrt_2pi = std::numbers::inv_sqrtpi_v<T> / std::numbers::sqrt2_v<T>;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T x = in.value[i];
      T d = T(0);
      switch (kind) {
        case ActivationKind::leaky_relu:
          d = x > T(0) ? T(1) : negative_slope;
          break;
        case ActivationKind::gelu:
          d = T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>)) +
              x * inv_sqrt_2pi * std::exp(T(-0.5) * x * x);
          break;
        case ActivationKind::sigmoid: {
          const T y = n.value[i];
          d = y * (T(1) - y);
          break;
        }
      }
      g[i] += n.grad[i] * d;
    }
  });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& input, double rate, Mode mode, Rng& rng) {
  require(rate >= 0.0 && rate < 1.0, ErrorCode::invalid_argument,
          "dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  if (mode == Mode::infer || rate == 0.0) return input;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> mask(input.size());
  for (auto& m : mask) m = rng.uniform() < rate ? T(0) : keep_scale;
  std::vector<T> out(input.size());
  const auto xv = input.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  return make_result<T>(input.shape(), std::move(out), {input},
                        [mask = std::move(mask)](detail::Node<T>& n) {
    auto& g = n.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * mask[i];
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weights,
                 const std::optional<NoDeduce<Tensor<T>>>& bias) {
  require(input.rank() == 2 && weights.rank() == 2 && weights.dim(1) == input.dim(1),
          ErrorCode::shape_mismatch,
          "linear: cannot apply weights " + to_string(weights.shape()) + " to input " +
              to_string(input.shape()));
  const std::size_t batch = input.dim(0);
  const std::size_t in_f = input.dim(1);
  const std::size_t out_f = weights.dim(0);
  if (bias) {
    require(bias->size() == out_f, ErrorCode::shape_mismatch,
            "linear: bias has " + std::to_string(bias->size()) + " entries for " +
                std::to_string(out_f) + " outputs");
  }
  const auto x = input.values();
  const auto w = weights.values();
  std::vector<T> out(batch * out_f);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < out_f; ++o) {
      T acc = bias ? bias->values()[o] : T(0);
      for (std::size_t f = 0; f < in_f; ++f) acc += x[b * in_f + f] * w[o * in_f + f];
      out[b * out_f + o] = acc;
    }
  std::vector<Tensor<T>> inputs{input, weights};
  if (bias) inputs.push_back(*bias);
  return make_result<T>({batch, out_f}, std::move(out), std::move(inputs),
                        [batch, in_f, out_f](detail::Node<T>& n) {
    auto& xin = *n.inputs[0];
    auto& win = *n.inputs[1];
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t o = 0; o < out_f; ++o) {
        const T go = n.grad[b * out_f + o];
        if (xin.requires_grad) {
          auto& gx = xin.grad_buffer();
          for (std::size_t f = 0; f < in_f; ++f) gx[b * in_f + f] += go * win.value[o * in_f + f];
        }
        if (win.requires_grad) {
          auto& gw = win.grad_buffer();
          for (std::size_t f = 0; f < in_f; ++f) gw[o * in_f + f] += go * xin.value[b * in_f + f];
        }
        if (n.inputs.size() > 2 && n.inputs[2]->requires_grad) n.inputs[2]->grad_buffer()[o] += go;
      }
  });
}

template <typename T>
Tensor<T> bce_loss(const Tensor<T>& probabilities, std::span<const NoDeduce<T>> labels, NoDeduce<T> clamp) {
  const std::size_t n = probabilities.size();
  require(n > 0 && labels.size() == n, ErrorCode::shape_mismatch,
          "bce_loss: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) +
              " probabilities");
  for (auto y : labels) {
    require(y == T(0) || y == T(1), ErrorCode::invalid_argument,
            "bce_loss: labels must be 0 or 1, got " + std::to_string(static_cast<double>(y)));
  }
  const auto p = probabilities.values();
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T pc = std::clamp(p[i], clamp, T(1) - clamp);
    total -= labels[i] * std::log(pc) + (T(1) - labels[i]) * std::log(T(1) - pc);
  }
  std::vector<T> y(labels.begin(), labels.end());
  return make_result<T>({1}, {total / static_cast<T>(n)}, {probabilities},
                        [y = std::move(y), clamp](detail::Node<T>& node) {
    auto& in = *node.inputs[0];
    auto& g = in.grad_buffer();
    const T scale = node.grad[0] / static_cast<T>(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      const T pv = in.value[i];
      if (pv < clamp || pv > T(1) - clamp) continue;
      g[i] += scale * (-y[i] / pv + (T(1) - y[i]) / (T(1) - pv));
    }
  });
}

#define UTNAS_INSTANTIATE_OPS(T)                                                            \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> sum<T>(const Tensor<T>&);                                              \
  template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                                   \
  template Tensor<T> conv3d<T>(const Tensor<T>&, const Tensor<T>&,                          \
                               const std::optional<Tensor<T>>&, const Conv3dOptions&);      \
  template Tensor<T> pool3d<T>(PoolKind, const Tensor<T>&, const Pool3dOptions&);           \
  template Tensor<T> global_avg_pool<T>(const Tensor<T>&);                                  \
  template Tensor<T> batch_norm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,    \
                                   std::span<T>, std::span<T>, Mode, T, T);                 \
  template Tensor<T> activation<T>(ActivationKind, const Tensor<T>&, T);                    \
  template Tensor<T> dropout<T>(const Tensor<T>&, double, Mode, Rng&);                      \
  template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&,                          \
                               const std::optional<Tensor<T>>&);                            \
  template Tensor<T> bce_loss<T>(const Tensor<T>&, std::span<const T>, T);

UTNAS_INSTANTIATE_OPS(float)
UTNAS_INSTANTIATE_OPS(double)

#undef UTNAS_INSTANTIATE_OPS

}  // namespace utnas::num

// Copyright 2026 The cwic Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cwic/tensor/ops.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cwic/errors.h"

namespace cwic {

namespace {

template <typename T>
using Node = detail::Node<T>;
template <typename T>
using NodePtr = std::shared_ptr<detail::Node<T>>;
template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

// Gradient buffer of an input, or nullptr when it does not take gradients.
template <typename T>
T* grad_of(const NodePtr<T>& n) {
  return n->requires_grad ? n->grad_buffer() : nullptr;
}

std::array<int64_t, 4> contiguous_strides(const Shape& s) {
  return {s[1] * s[2] * s[3], s[2] * s[3], s[3], 1};
}

// ---------------------------------------------------------------------------
// Broadcasting

struct Broadcast {
  Shape out;
  std::array<int64_t, 4> stride_a{};
  std::array<int64_t, 4> stride_b{};
  bool same = false;
};

Broadcast plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  Broadcast p;
  p.same = a == b;
  for (int i = 0; i < 4; ++i) {
    if (a[i] == b[i] || b[i] == 1) {
      p.out.dims[static_cast<size_t>(i)] = a[i];
    } else if (a[i] == 1) {
      p.out.dims[static_cast<size_t>(i)] = b[i];
    } else {
      throw DimensionError(std::string(op) + ": cannot broadcast " + a.str() + " with " + b.str());
    }
  }
  const auto sa = contiguous_strides(a);
  const auto sb = contiguous_strides(b);
  for (size_t i = 0; i < 4; ++i) {
    p.stride_a[i] = (a.dims[i] == 1 && p.out.dims[i] != 1) ? 0 : sa[i];
    p.stride_b[i] = (b.dims[i] == 1 && p.out.dims[i] != 1) ? 0 : sb[i];
  }
  return p;
}

template <class F>
void for_each_broadcast(const Broadcast& p, F&& f) {
  const Shape& o = p.out;
  int64_t out = 0;
  for (int64_t n = 0; n < o[0]; ++n) {
    for (int64_t c = 0; c < o[1]; ++c) {
      for (int64_t h = 0; h < o[2]; ++h) {
        int64_t ia = n * p.stride_a[0] + c * p.stride_a[1] + h * p.stride_a[2];
        int64_t ib = n * p.stride_b[0] + c * p.stride_b[1] + h * p.stride_b[2];
        for (int64_t w = 0; w < o[3]; ++w) {
          f(out++, ia, ib);
          ia += p.stride_a[3];
          ib += p.stride_b[3];
        }
      }
    }
  }
}

// fwd(a, b) -> value; partials(a, b) -> {d/da, d/db}.
template <typename T, class Fwd, class Partials>
Tensor<T> binary_op(const char* op, const Tensor<T>& a, const Tensor<T>& b, Fwd fwd,
                    Partials partials) {
  const Broadcast plan = plan_broadcast(a.shape(), b.shape(), op);
  std::vector<T> out(static_cast<size_t>(plan.out.numel()));
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  if (plan.same) {
    for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(pa[i], pb[i]);
  } else {
    for_each_broadcast(plan, [&](int64_t o, int64_t ia, int64_t ib) { out[o] = fwd(pa[ia], pb[ib]); });
  }
  return detail::make_result<T>(
      op, plan.out, std::move(out), {&a, &b},
      [an = a.node(), bn = b.node(), plan, partials](Node<T>& self) {
        T* ga = grad_of(an);
        T* gb = grad_of(bn);
        const T* va = an->data.data();
        const T* vb = bn->data.data();
        const T* g = self.grad.data();
        for_each_broadcast(plan, [&](int64_t o, int64_t ia, int64_t ib) {
          const auto [da, db] = partials(va[ia], vb[ib]);
          if (ga) ga[ia] += g[o] * da;
          if (gb) gb[ib] += g[o] * db;
        });
      });
}

// fwd(x) -> y; deriv(x, y) -> dy/dx.
template <typename T, class Fwd, class Deriv>
Tensor<T> unary_op(const char* op, const Tensor<T>& x, Fwd fwd, Deriv deriv) {
  std::vector<T> out(static_cast<size_t>(x.numel()));
  const T* px = x.data().data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(px[i]);
  return detail::make_result<T>(op, x.shape(), std::move(out), {&x},
                                [xn = x.node(), deriv](Node<T>& self) {
                                  T* gx = grad_of(xn);
                                  if (!gx) return;
                                  const T* vx = xn->data.data();
                                  const T* vy = self.data.data();
                                  const T* g = self.grad.data();
                                  for (size_t i = 0; i < self.data.size(); ++i) {
                                    gx[i] += g[i] * deriv(vx[i], vy[i]);
                                  }
                                });
}

// Folds the side of `kink` each element lies on into the active trace.
template <typename T>
void trace_sides(const Tensor<T>& x, T kink) {
  uint64_t* sig = detail::branch_signature();
  if (!sig) return;
  for (T v : x.data()) {
    const uint64_t side = v > kink ? 1 : (v < kink ? 2 : 3);
    *sig = (*sig ^ side) * 0x100000001b3ull;
  }
}

int64_t reduced_size(const Shape& s, unsigned axes, Shape* out) {
  for (size_t i = 0; i < 4; ++i) out->dims[i] = (axes & (1u << i)) ? 1 : s.dims[i];
  return out->numel();
}

// Maps every input element to its reduction slot.
template <class F>
void for_each_reduced(const Shape& in, const Shape& out, F&& f) {
  std::array<int64_t, 4> so = contiguous_strides(out);
  for (size_t i = 0; i < 4; ++i) {
    if (out.dims[i] == 1 && in.dims[i] != 1) so[i] = 0;
  }
  int64_t idx = 0;
  for (int64_t n = 0; n < in[0]; ++n) {
    for (int64_t c = 0; c < in[1]; ++c) {
      for (int64_t h = 0; h < in[2]; ++h) {
        int64_t o = n * so[0] + c * so[1] + h * so[2];
        for (int64_t w = 0; w < in[3]; ++w) {
          f(idx++, o);
          o += so[3];
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// im2col geometry shared by conv2d and conv2d_transpose. "in" is the dense
// image side, "out" the strided grid side.

struct ConvGeometry {
  int64_t channels, in_h, in_w, kh, kw, stride, pad, out_h, out_w;
  int64_t rows() const { return channels * kh * kw; }
  int64_t cols() const { return out_h * out_w; }
};

template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* col) {
  for (int64_t c = 0; c < g.channels; ++c) {
    for (int64_t ki = 0; ki < g.kh; ++ki) {
      for (int64_t kj = 0; kj < g.kw; ++kj) {
        T* row = col + ((c * g.kh + ki) * g.kw + kj) * g.cols();
        for (int64_t oh = 0; oh < g.out_h; ++oh) {
          const int64_t ih = oh * g.stride - g.pad + ki;
          T* dst = row + oh * g.out_w;
          if (ih < 0 || ih >= g.in_h) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* src = image + (c * g.in_h + ih) * g.in_w;
          for (int64_t ow = 0; ow < g.out_w; ++ow) {
            const int64_t iw = ow * g.stride - g.pad + kj;
            dst[ow] = (iw >= 0 && iw < g.in_w) ? src[iw] : T(0);
          }
        }
      }
    }
  }
}

// Adds col back onto the image (adjoint of im2col).
template <typename T>
void col2im(const T* col, const ConvGeometry& g, T* image) {
  for (int64_t c = 0; c < g.channels; ++c) {
    for (int64_t ki = 0; ki < g.kh; ++ki) {
      for (int64_t kj = 0; kj < g.kw; ++kj) {
        const T* row = col + ((c * g.kh + ki) * g.kw + kj) * g.cols();
        for (int64_t oh = 0; oh < g.out_h; ++oh) {
          const int64_t ih = oh * g.stride - g.pad + ki;
          if (ih < 0 || ih >= g.in_h) continue;
          const T* src = row + oh * g.out_w;
          T* dst = image + (c * g.in_h + ih) * g.in_w;
          for (int64_t ow = 0; ow < g.out_w; ++ow) {
            const int64_t iw = ow * g.stride - g.pad + kj;
            if (iw >= 0 && iw < g.in_w) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

template <typename T>
void check_bias(const Tensor<T>& bias, int64_t channels, const char* op) {
  if (bias.defined() && bias.numel() != channels) {
    throw DimensionError(std::string(op) + ": bias has " + std::to_string(bias.numel()) +
                         " elements, expected " + std::to_string(channels));
  }
}

std::vector<int64_t> spatial_index(const Shape& in, const Shape& out,
                                   const std::vector<int64_t>& rows,
                                   const std::vector<int64_t>& cols) {
  std::vector<int64_t> idx(static_cast<size_t>(out.numel()));
  size_t o = 0;
  for (int64_t n = 0; n < out[0]; ++n) {
    for (int64_t c = 0; c < out[1]; ++c) {
      const int64_t plane = (n * in[1] + c) * in[2];
      for (int64_t h = 0; h < out[2]; ++h) {
        const int64_t r = rows[static_cast<size_t>(h)];
        for (int64_t w = 0; w < out[3]; ++w) {
          const int64_t q = cols[static_cast<size_t>(w)];
          idx[o++] = (r < 0 || q < 0) ? -1 : (plane + r) * in[3] + q;
        }
      }
    }
  }
  return idx;
}

}  // namespace

int64_t mirror_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * (n - 1);
  int64_t m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>(
      "add", a, b, [](T x, T y) { return x + y; },
      [](T, T) { return std::pair<T, T>{T(1), T(1)}; });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>(
      "sub", a, b, [](T x, T y) { return x - y; },
      [](T, T) { return std::pair<T, T>{T(1), T(-1)}; });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>(
      "mul", a, b, [](T x, T y) { return x * y; },
      [](T x, T y) { return std::pair<T, T>{y, x}; });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>(
      "div", a, b, [](T x, T y) { return x / y; },
      [](T x, T y) { return std::pair<T, T>{T(1) / y, -x / (y * y)}; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, std::type_identity_t<T> s) {
  return unary_op<T>("add_scalar", x, [s](T v) { return v + s; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& x, std::type_identity_t<T> s) {
  return unary_op<T>("mul_scalar", x, [s](T v) { return v * s; }, [s](T, T) { return s; });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& x) {
  return unary_op<T>("neg", x, [](T v) { return -v; }, [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return unary_op<T>("square", x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& x) {
  return unary_op<T>(
      "sqrt", x, [](T v) { return std::sqrt(v); }, [](T, T y) { return T(0.5) / y; });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary_op<T>("exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  return unary_op<T>("log", x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> pow(const Tensor<T>& x, std::type_identity_t<T> exponent) {
  return unary_op<T>(
      "pow", x, [exponent](T v) { return std::pow(v, exponent); },
      [exponent](T v, T) { return exponent * std::pow(v, exponent - T(1)); });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  trace_sides(x, T(0));
  return unary_op<T>(
      "abs", x, [](T v) { return std::abs(v); },
      [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary_op<T>(
      "sigmoid", x,
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& x) {
  return unary_op<T>(
      "softplus", x,
      [](T v) { return v > T(0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      [](T v, T) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary_op<T>(
      "tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, std::type_identity_t<T> slope) {
  trace_sides(x, T(0));
  return unary_op<T>(
      "leaky_relu", x, [slope](T v) { return v > T(0) ? v : v * slope; },
      [slope](T v, T) { return v > T(0) ? T(1) : slope; });
}

template <typename T>
Tensor<T> normal_cdf(const Tensor<T>& x) {
  return unary_op<T>(
      "normal_cdf", x, [](T v) { return T(0.5) * std::erfc(-v * (T(1) / std::numbers::sqrt2_v<T>)); },
      [](T v, T) {
        return std::numbers::inv_sqrtpi_v<T> * (T(1) / std::numbers::sqrt2_v<T>) * std::exp(-T(0.5) * v * v);
      });
}

template <typename T>
Tensor<T> clamp_min(const Tensor<T>& x, std::type_identity_t<T> lo) {
  trace_sides(x, lo);
  return unary_op<T>(
      "clamp_min", x, [lo](T v) { return v < lo ? lo : v; },
      [lo](T v, T) { return v >= lo ? T(1) : T(0); });
}

template <typename T>
Tensor<T> round(const Tensor<T>& x) {
  std::vector<T> out(static_cast<size_t>(x.numel()));
  const T* px = x.data().data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::nearbyint(px[i]);
  return detail::make_result<T>("round", x.shape(), std::move(out),
                                std::initializer_list<const Tensor<T>*>{}, nullptr);
}

template <typename T>
Tensor<T> round_ste(const Tensor<T>& x) {
  return unary_op<T>(
      "round_ste", x, [](T v) { return std::nearbyint(v); }, [](T, T) { return T(1); });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  return sum(x, kAllAxes);
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x, unsigned axes) {
  Shape out_shape;
  const int64_t count = reduced_size(x.shape(), axes, &out_shape);
  std::vector<double> acc(static_cast<size_t>(count), 0.0);
  const T* px = x.data().data();
  for_each_reduced(x.shape(), out_shape, [&](int64_t i, int64_t o) { acc[o] += px[i]; });
  std::vector<T> out(acc.begin(), acc.end());
  const Shape in_shape = x.shape();
  return detail::make_result<T>("sum", out_shape, std::move(out), {&x},
                                [xn = x.node(), in_shape, out_shape](Node<T>& self) {
                                  T* gx = grad_of(xn);
                                  if (!gx) return;
                                  const T* g = self.grad.data();
                                  for_each_reduced(in_shape, out_shape,
                                                   [&](int64_t i, int64_t o) { gx[i] += g[o]; });
                                });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return mean(x, kAllAxes);
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x, unsigned axes) {
  Shape out_shape;
  const int64_t count = reduced_size(x.shape(), axes, &out_shape);
  const double n = static_cast<double>(x.numel() / count);
  std::vector<double> acc(static_cast<size_t>(count), 0.0);
  const T* px = x.data().data();
  for_each_reduced(x.shape(), out_shape, [&](int64_t i, int64_t o) { acc[o] += px[i]; });
  std::vector<T> out(acc.size());
  for (size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<T>(acc[i] / n);
  const Shape in_shape = x.shape();
  const T inv = static_cast<T>(1.0 / n);
  return detail::make_result<T>("mean", out_shape, std::move(out), {&x},
                                [xn = x.node(), in_shape, out_shape, inv](Node<T>& self) {
                                  T* gx = grad_of(xn);
                                  if (!gx) return;
                                  const T* g = self.grad.data();
                                  for_each_reduced(in_shape, out_shape,
                                                   [&](int64_t i, int64_t o) { gx[i] += g[o] * inv; });
                                });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  if (axis < 0 || axis > 3) throw DimensionError("softmax: axis must be in [0, 3]");
  const Shape& s = x.shape();
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  for (int i = axis + 1; i < 4; ++i) inner *= s[i];
  const int64_t len = s[axis];
  std::vector<T> out(static_cast<size_t>(x.numel()));
  const T* px = x.data().data();
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t i = 0; i < inner; ++i) {
      const int64_t base = o * len * inner + i;
      T mx = px[base];
      for (int64_t k = 1; k < len; ++k) mx = std::max(mx, px[base + k * inner]);
      double total = 0.0;
      for (int64_t k = 0; k < len; ++k) {
        const T e = std::exp(px[base + k * inner] - mx);
        out[static_cast<size_t>(base + k * inner)] = e;
        total += e;
      }
      const T inv = static_cast<T>(1.0 / total);
      for (int64_t k = 0; k < len; ++k) out[static_cast<size_t>(base + k * inner)] *= inv;
    }
  }
  return detail::make_result<T>(
      "softmax", s, std::move(out), {&x}, [xn = x.node(), outer, inner, len](Node<T>& self) {
        T* gx = grad_of(xn);
        if (!gx) return;
        const T* y = self.data.data();
        const T* g = self.grad.data();
        for (int64_t o = 0; o < outer; ++o) {
          for (int64_t i = 0; i < inner; ++i) {
            const int64_t base = o * len * inner + i;
            double dot = 0.0;
            for (int64_t k = 0; k < len; ++k) dot += double(g[base + k * inner]) * y[base + k * inner];
            for (int64_t k = 0; k < len; ++k) {
              const int64_t j = base + k * inner;
              gx[j] += y[j] * (g[j] - static_cast<T>(dot));
            }
          }
        }
      });
}

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x) {
  const Shape& s = x.shape();
  if (s.h() % 2 != 0 || s.w() % 2 != 0) {
    throw DimensionError("avg_pool2d needs even spatial extents, got " + s.str());
  }
  const Shape os{s.n(), s.c(), s.h() / 2, s.w() / 2};
  std::vector<T> out(static_cast<size_t>(os.numel()));
  const T* px = x.data().data();
  size_t o = 0;
  for (int64_t p = 0; p < s.n() * s.c(); ++p) {
    const T* plane = px + p * s.h() * s.w();
    for (int64_t h = 0; h < os.h(); ++h) {
      const T* r0 = plane + (2 * h) * s.w();
      const T* r1 = r0 + s.w();
      for (int64_t w = 0; w < os.w(); ++w) {
        out[o++] = T(0.25) * (r0[2 * w] + r0[2 * w + 1] + r1[2 * w] + r1[2 * w + 1]);
      }
    }
  }
  return detail::make_result<T>("avg_pool2d", os, std::move(out), {&x}, [xn = x.node(), s, os](Node<T>& self) {
    T* gx = grad_of(xn);
    if (!gx) return;
    const T* g = self.grad.data();
    size_t o = 0;
    for (int64_t p = 0; p < s.n() * s.c(); ++p) {
      T* plane = gx + p * s.h() * s.w();
      for (int64_t h = 0; h < os.h(); ++h) {
        T* r0 = plane + (2 * h) * s.w();
        T* r1 = r0 + s.w();
        for (int64_t w = 0; w < os.w(); ++w) {
          const T v = T(0.25) * g[o++];
          r0[2 * w] += v;
          r0[2 * w + 1] += v;
          r1[2 * w] += v;
          r1[2 * w + 1] += v;
        }
      }
    }
  });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa[3] != sb[2]) {
    throw DimensionError("matmul: inner extents differ in " + sa.str() + " x " + sb.str());
  }
  int64_t batch[2];
  for (int i = 0; i < 2; ++i) {
    if (sa[i] == sb[i] || sb[i] == 1) {
      batch[i] = sa[i];
    } else if (sa[i] == 1) {
      batch[i] = sb[i];
    } else {
      throw DimensionError("matmul: cannot broadcast batch dims of " + sa.str() + " and " + sb.str());
    }
  }
  const int64_t m = sa[2], k = sa[3], n = sb[3];
  const Shape os{batch[0], batch[1], m, n};
  auto offset = [](const Shape& s, int64_t i, int64_t j) {
    const int64_t ii = s[0] == 1 ? 0 : i;
    const int64_t jj = s[1] == 1 ? 0 : j;
    return (ii * s[1] + jj) * s[2] * s[3];
  };
  std::vector<T> out(static_cast<size_t>(os.numel()));
  for (int64_t i = 0; i < batch[0]; ++i) {
    for (int64_t j = 0; j < batch[1]; ++j) {
      ConstMapMat<T> ma(a.data().data() + offset(sa, i, j), m, k);
      ConstMapMat<T> mb(b.data().data() + offset(sb, i, j), k, n);
      MapMat<T> mo(out.data() + (i * batch[1] + j) * m * n, m, n);
      mo.noalias() = ma * mb;
    }
  }
  return detail::make_result<T>(
      "matmul", os, std::move(out), {&a, &b},
      [an = a.node(), bn = b.node(), sa, sb, batch0 = batch[0], batch1 = batch[1], m, k, n,
       offset](Node<T>& self) {
        T* ga = grad_of(an);
        T* gb = grad_of(bn);
        for (int64_t i = 0; i < batch0; ++i) {
          for (int64_t j = 0; j < batch1; ++j) {
            ConstMapMat<T> g(self.grad.data() + (i * batch1 + j) * m * n, m, n);
            if (ga) {
              ConstMapMat<T> mb(bn->data.data() + offset(sb, i, j), k, n);
              MapMat<T> dst(ga + offset(sa, i, j), m, k);
              dst.noalias() += g * mb.transpose();
            }
            if (gb) {
              ConstMapMat<T> ma(an->data.data() + offset(sa, i, j), m, k);
              MapMat<T> dst(gb + offset(sb, i, j), k, n);
              dst.noalias() += ma.transpose() * g;
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Layout

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape.numel() != x.numel()) {
    throw DimensionError("reshape: " + x.shape().str() + " -> " + shape.str() + " changes element count");
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  return detail::make_result<T>("reshape", shape, std::move(out), {&x}, [xn = x.node()](Node<T>& self) {
    T* gx = grad_of(xn);
    if (!gx) return;
    for (size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> gather(const Tensor<T>& x, Shape out_shape, std::vector<int64_t> indices) {
  if (static_cast<int64_t>(indices.size()) != out_shape.numel()) {
    throw DimensionError("gather: index count does not match " + out_shape.str());
  }
  const int64_t limit = x.numel();
  std::vector<T> out(indices.size());
  const T* px = x.data().data();
  for (size_t i = 0; i < indices.size(); ++i) {
    const int64_t j = indices[i];
    if (j >= limit) throw DimensionError("gather: index out of range");
    out[i] = j < 0 ? T(0) : px[j];
  }
  auto shared = std::make_shared<const std::vector<int64_t>>(std::move(indices));
  return detail::make_result<T>("gather", out_shape, std::move(out), {&x},
                                [xn = x.node(), shared](Node<T>& self) {
                                  T* gx = grad_of(xn);
                                  if (!gx) return;
                                  const auto& idx = *shared;
                                  for (size_t i = 0; i < idx.size(); ++i) {
                                    if (idx[i] >= 0) gx[idx[i]] += self.grad[i];
                                  }
                                });
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, std::array<int, 4> order) {
  const Shape& s = x.shape();
  std::array<bool, 4> seen{};
  for (int a : order) {
    if (a < 0 || a > 3 || seen[static_cast<size_t>(a)]) throw DimensionError("permute: invalid axis order");
    seen[static_cast<size_t>(a)] = true;
  }
  Shape os;
  for (size_t i = 0; i < 4; ++i) os.dims[i] = s[order[i]];
  const auto si = contiguous_strides(s);
  std::array<int64_t, 4> st{};
  for (size_t i = 0; i < 4; ++i) st[i] = si[static_cast<size_t>(order[i])];
  std::vector<int64_t> idx(static_cast<size_t>(os.numel()));
  size_t o = 0;
  for (int64_t a = 0; a < os[0]; ++a)
    for (int64_t b = 0; b < os[1]; ++b)
      for (int64_t c = 0; c < os[2]; ++c)
        for (int64_t d = 0; d < os[3]; ++d) idx[o++] = a * st[0] + b * st[1] + c * st[2] + d * st[3];
  return gather(x, os, std::move(idx));
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x, int axis_a, int axis_b) {
  std::array<int, 4> order{0, 1, 2, 3};
  std::swap(order[static_cast<size_t>(axis_a)], order[static_cast<size_t>(axis_b)]);
  return permute(x, order);
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  if (axis < 0 || axis > 3) throw DimensionError("concat: axis must be in [0, 3]");
  Shape os = parts[0].shape();
  int64_t total = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < 4; ++i) {
      if (i != axis && p.shape()[i] != os[i]) {
        throw DimensionError("concat: " + p.shape().str() + " does not match " + os.str());
      }
    }
    total += p.shape()[axis];
  }
  os.dims[static_cast<size_t>(axis)] = total;
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= os[i];
  for (int i = axis + 1; i < 4; ++i) inner *= os[i];
  std::vector<T> out(static_cast<size_t>(os.numel()));
  std::vector<int64_t> offsets;
  int64_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const int64_t chunk = p.shape()[axis] * inner;
    const T* src = p.data().data();
    for (int64_t o = 0; o < outer; ++o) {
      std::copy(src + o * chunk, src + (o + 1) * chunk, out.begin() + (o * total + off) * inner);
    }
    off += p.shape()[axis];
  }
  std::vector<NodePtr<T>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return detail::make_result<T>("concat", os, std::move(out), parts,
                                [nodes, offsets, outer, inner, total, axis](Node<T>& self) {
                                  for (size_t k = 0; k < nodes.size(); ++k) {
                                    T* gp = grad_of(nodes[k]);
                                    if (!gp) continue;
                                    const int64_t extent = nodes[k]->shape[axis];
                                    const int64_t chunk = extent * inner;
                                    for (int64_t o = 0; o < outer; ++o) {
                                      const T* g = self.grad.data() + (o * total + offsets[k]) * inner;
                                      T* dst = gp + o * chunk;
                                      for (int64_t i = 0; i < chunk; ++i) dst[i] += g[i];
                                    }
                                  }
                                });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, int64_t start, int64_t length) {
  const Shape& s = x.shape();
  if (axis < 0 || axis > 3 || start < 0 || length <= 0 || start + length > s[axis]) {
    throw DimensionError("slice: range out of bounds for " + s.str());
  }
  Shape os = s;
  os.dims[static_cast<size_t>(axis)] = length;
  const auto si = contiguous_strides(s);
  std::vector<int64_t> idx(static_cast<size_t>(os.numel()));
  size_t o = 0;
  std::array<int64_t, 4> i{};
  for (i[0] = 0; i[0] < os[0]; ++i[0])
    for (i[1] = 0; i[1] < os[1]; ++i[1])
      for (i[2] = 0; i[2] < os[2]; ++i[2])
        for (i[3] = 0; i[3] < os[3]; ++i[3]) {
          int64_t flat = 0;
          for (size_t d = 0; d < 4; ++d) flat += (i[d] + (static_cast<int>(d) == axis ? start : 0)) * si[d];
          idx[o++] = flat;
        }
  return gather(x, os, std::move(idx));
}

template <typename T>
Tensor<T> pad2d(const Tensor<T>& x, int64_t top, int64_t bottom, int64_t left, int64_t right,
                PadMode mode) {
  const Shape& s = x.shape();
  if (top < 0 || bottom < 0 || left < 0 || right < 0) throw ContractError("pad2d: negative pad");
  if (mode == PadMode::kReflect &&
      (std::max(top, bottom) >= s.h() || std::max(left, right) >= s.w())) {
    throw PaddingError("reflect padding needs pad < extent, got pads (" + std::to_string(top) + "," +
                       std::to_string(bottom) + "," + std::to_string(left) + "," +
                       std::to_string(right) + ") on " + s.str());
  }
  const Shape os{s.n(), s.c(), s.h() + top + bottom, s.w() + left + right};
  auto map = [mode](int64_t i, int64_t n) -> int64_t {
    if (i >= 0 && i < n) return i;
    if (mode == PadMode::kZero) return -1;
    return mirror_index(i, n);
  };
  std::vector<int64_t> rows(static_cast<size_t>(os.h())), cols(static_cast<size_t>(os.w()));
  for (int64_t h = 0; h < os.h(); ++h) rows[static_cast<size_t>(h)] = map(h - top, s.h());
  for (int64_t w = 0; w < os.w(); ++w) cols[static_cast<size_t>(w)] = map(w - left, s.w());
  return gather(x, os, spatial_index(s, os, rows, cols));
}

template <typename T>
Tensor<T> mirror_pad2d(const Tensor<T>& x, int64_t bottom, int64_t right) {
  const Shape& s = x.shape();
  if (bottom < 0 || right < 0) throw ContractError("mirror_pad2d: negative pad");
  if (bottom == 0 && right == 0) return x;
  const Shape os{s.n(), s.c(), s.h() + bottom, s.w() + right};
  std::vector<int64_t> rows(static_cast<size_t>(os.h())), cols(static_cast<size_t>(os.w()));
  for (int64_t h = 0; h < os.h(); ++h) rows[static_cast<size_t>(h)] = mirror_index(h, s.h());
  for (int64_t w = 0; w < os.w(); ++w) cols[static_cast<size_t>(w)] = mirror_index(w, s.w());
  return gather(x, os, spatial_index(s, os, rows, cols));
}

template <typename T>
Tensor<T> crop2d(const Tensor<T>& x, int64_t top, int64_t left, int64_t height, int64_t width) {
  const Shape& s = x.shape();
  if (top < 0 || left < 0 || height <= 0 || width <= 0 || top + height > s.h() || left + width > s.w()) {
    throw DimensionError("crop2d: window out of bounds for " + s.str());
  }
  if (top == 0 && left == 0 && height == s.h() && width == s.w()) return x;
  const Shape os{s.n(), s.c(), height, width};
  std::vector<int64_t> rows(static_cast<size_t>(height)), cols(static_cast<size_t>(width));
  for (int64_t h = 0; h < height; ++h) rows[static_cast<size_t>(h)] = top + h;
  for (int64_t w = 0; w < width; ++w) cols[static_cast<size_t>(w)] = left + w;
  return gather(x, os, spatial_index(s, os, rows, cols));
}

// ---------------------------------------------------------------------------
// Convolution

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int stride,
                 int pad, PadMode mode) {
  if (stride < 1 || pad < 0) throw ContractError("conv2d: stride must be >= 1 and pad >= 0");
  if (mode == PadMode::kReflect && pad > 0) {
    return conv2d(pad2d(input, pad, pad, pad, pad, PadMode::kReflect), weight, bias, stride, 0,
                  PadMode::kZero);
  }
  const Shape& si = input.shape();
  const Shape& sw = weight.shape();
  if (sw.c() != si.c()) {
    throw DimensionError("conv2d: weight " + sw.str() + " does not accept input " + si.str());
  }
  check_bias(bias, sw.n(), "conv2d");
  const int64_t kh = sw.h(), kw = sw.w();
  if (si.h() + 2 * pad < kh || si.w() + 2 * pad < kw) {
    throw DimensionError("conv2d: kernel larger than padded input " + si.str());
  }
  const ConvGeometry g{si.c(), si.h(), si.w(), kh, kw, stride, pad,
                       (si.h() + 2 * pad - kh) / stride + 1, (si.w() + 2 * pad - kw) / stride + 1};
  const int64_t cout = sw.n();
  const Shape os{si.n(), cout, g.out_h, g.out_w};
  std::vector<T> out(static_cast<size_t>(os.numel()));
  const bool keep_cols = grad_enabled() && (input.requires_grad() || weight.requires_grad());
  auto cols = std::make_shared<std::vector<T>>();
  std::vector<T> scratch(static_cast<size_t>(g.rows() * g.cols()));
  if (keep_cols) cols->resize(static_cast<size_t>(si.n() * g.rows() * g.cols()));
  ConstMapMat<T> wm(weight.data().data(), cout, g.rows());
  for (int64_t n = 0; n < si.n(); ++n) {
    T* col = keep_cols ? cols->data() + n * g.rows() * g.cols() : scratch.data();
    im2col(input.data().data() + n * si.c() * si.h() * si.w(), g, col);
    MapMat<T> om(out.data() + n * cout * g.cols(), cout, g.cols());
    om.noalias() = wm * ConstMapMat<T>(col, g.rows(), g.cols());
    if (bias.defined()) {
      for (int64_t c = 0; c < cout; ++c) om.row(c).array() += bias.data()[static_cast<size_t>(c)];
    }
  }
  return detail::make_result<T>(
      "conv2d", os, std::move(out), {&input, &weight, &bias},
      [xn = input.node(), wn = weight.node(), bn = bias.defined() ? bias.node() : nullptr, g, cout, cols,
       batch = si.n()](Node<T>& self) {
        T* gx = grad_of(xn);
        T* gw = grad_of(wn);
        T* gb = bn ? grad_of(bn) : nullptr;
        ConstMapMat<T> wm(wn->data.data(), cout, g.rows());
        std::vector<T> dcol(static_cast<size_t>(g.rows() * g.cols()));
        for (int64_t n = 0; n < batch; ++n) {
          ConstMapMat<T> gy(self.grad.data() + n * cout * g.cols(), cout, g.cols());
          if (gb) {
            for (int64_t c = 0; c < cout; ++c) gb[c] += gy.row(c).sum();
          }
          if (gw) {
            ConstMapMat<T> col(cols->data() + n * g.rows() * g.cols(), g.rows(), g.cols());
            MapMat<T>(gw, cout, g.rows()).noalias() += gy * col.transpose();
          }
          if (gx) {
            MapMat<T>(dcol.data(), g.rows(), g.cols()).noalias() = wm.transpose() * gy;
            col2im(dcol.data(), g, gx + n * g.channels * g.in_h * g.in_w);
          }
        }
      });
}

template <typename T>
Tensor<T> conv2d_transpose(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                           int stride, int pad, int output_padding) {
  if (stride < 1 || pad < 0 || output_padding < 0 || output_padding >= stride) {
    throw ContractError("conv2d_transpose: need stride >= 1, pad >= 0, 0 <= output_padding < stride");
  }
  const Shape& si = input.shape();
  const Shape& sw = weight.shape();
  if (sw.n() != si.c() || sw.h() != sw.w()) {
    throw DimensionError("conv2d_transpose: weight " + sw.str() + " does not accept input " + si.str());
  }
  const int64_t cout = sw.c(), k = sw.h();
  check_bias(bias, cout, "conv2d_transpose");
  const int64_t oh = stride * (si.h() - 1) + k - 2 * pad + output_padding;
  const int64_t ow = stride * (si.w() - 1) + k - 2 * pad + output_padding;
  if (oh <= 0 || ow <= 0) throw DimensionError("conv2d_transpose: non-positive output extent");
  // The dense side is the output; the strided grid is the input.
  const ConvGeometry g{cout, oh, ow, k, k, stride, pad, si.h(), si.w()};
  const int64_t cin = si.c();
  const Shape os{si.n(), cout, oh, ow};
  std::vector<T> out(static_cast<size_t>(os.numel()), T(0));
  std::vector<T> col(static_cast<size_t>(g.rows() * g.cols()));
  ConstMapMat<T> wm(weight.data().data(), cin, g.rows());
  for (int64_t n = 0; n < si.n(); ++n) {
    ConstMapMat<T> xm(input.data().data() + n * cin * g.cols(), cin, g.cols());
    MapMat<T>(col.data(), g.rows(), g.cols()).noalias() = wm.transpose() * xm;
    T* dst = out.data() + n * cout * oh * ow;
    col2im(col.data(), g, dst);
    if (bias.defined()) {
      for (int64_t c = 0; c < cout; ++c) {
        const T b = bias.data()[static_cast<size_t>(c)];
        for (int64_t i = 0; i < oh * ow; ++i) dst[c * oh * ow + i] += b;
      }
    }
  }
  return detail::make_result<T>(
      "conv2d_transpose", os, std::move(out), {&input, &weight, &bias},
      [xn = input.node(), wn = weight.node(), bn = bias.defined() ? bias.node() : nullptr, g, cin,
       batch = si.n()](Node<T>& self) {
        T* gx = grad_of(xn);
        T* gw = grad_of(wn);
        T* gb = bn ? grad_of(bn) : nullptr;
        const int64_t plane = g.in_h * g.in_w;
        ConstMapMat<T> wm(wn->data.data(), cin, g.rows());
        std::vector<T> gcol(static_cast<size_t>(g.rows() * g.cols()));
        for (int64_t n = 0; n < batch; ++n) {
          const T* gy = self.grad.data() + n * g.channels * plane;
          if (gb) {
            for (int64_t c = 0; c < g.channels; ++c) {
              double acc = 0.0;
              for (int64_t i = 0; i < plane; ++i) acc += gy[c * plane + i];
              gb[c] += static_cast<T>(acc);
            }
          }
          if (!gx && !gw) continue;
          im2col(gy, g, gcol.data());
          ConstMapMat<T> gc(gcol.data(), g.rows(), g.cols());
          if (gx) MapMat<T>(gx + n * cin * g.cols(), cin, g.cols()).noalias() += wm * gc;
          if (gw) {
            ConstMapMat<T> xm(xn->data.data() + n * cin * g.cols(), cin, g.cols());
            MapMat<T>(gw, cin, g.rows()).noalias() += xm * gc.transpose();
          }
        }
      });
}

// ---------------------------------------------------------------------------

#define CWIC_INSTANTIATE_OPS(T)                                                                   \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                             \
  template Tensor<T> mul_scalar(const Tensor<T>&, T);                                             \
  template Tensor<T> neg(const Tensor<T>&);                                                       \
  template Tensor<T> square(const Tensor<T>&);                                                    \
  template Tensor<T> sqrt(const Tensor<T>&);                                                      \
  template Tensor<T> exp(const Tensor<T>&);                                                       \
  template Tensor<T> log(const Tensor<T>&);                                                       \
  template Tensor<T> pow(const Tensor<T>&, T);                                                    \
  template Tensor<T> abs(const Tensor<T>&);                                                       \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                   \
  template Tensor<T> softplus(const Tensor<T>&);                                                  \
  template Tensor<T> tanh(const Tensor<T>&);                                                      \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                             \
  template Tensor<T> normal_cdf(const Tensor<T>&);                                                \
  template Tensor<T> clamp_min(const Tensor<T>&, T);                                              \
  template Tensor<T> round(const Tensor<T>&);                                                     \
  template Tensor<T> round_ste(const Tensor<T>&);                                                 \
  template Tensor<T> sum(const Tensor<T>&);                                                       \
  template Tensor<T> sum(const Tensor<T>&, unsigned);                                             \
  template Tensor<T> mean(const Tensor<T>&);                                                      \
  template Tensor<T> mean(const Tensor<T>&, unsigned);                                            \
  template Tensor<T> softmax(const Tensor<T>&, int);                                              \
  template Tensor<T> avg_pool2d(const Tensor<T>&);                                                \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                            \
  template Tensor<T> permute(const Tensor<T>&, std::array<int, 4>);                               \
  template Tensor<T> transpose(const Tensor<T>&, int, int);                                       \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                                  \
  template Tensor<T> slice(const Tensor<T>&, int, int64_t, int64_t);                              \
  template Tensor<T> gather(const Tensor<T>&, Shape, std::vector<int64_t>);                       \
  template Tensor<T> pad2d(const Tensor<T>&, int64_t, int64_t, int64_t, int64_t, PadMode);        \
  template Tensor<T> mirror_pad2d(const Tensor<T>&, int64_t, int64_t);                            \
  template Tensor<T> crop2d(const Tensor<T>&, int64_t, int64_t, int64_t, int64_t);                \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int,       \
                            PadMode);                                                             \
  template Tensor<T> conv2d_transpose(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, \
                                      int, int);

CWIC_INSTANTIATE_OPS(float)
CWIC_INSTANTIATE_OPS(double)

#undef CWIC_INSTANTIATE_OPS

}  // namespace cwic

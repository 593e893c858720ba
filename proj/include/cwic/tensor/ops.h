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

#pragma once

#include <array>
#include <cstdint>
#include <type_traits>
#include <vector>

#include "cwic/tensor/tensor.h"

namespace cwic {

// Axis bits for reductions.
inline constexpr unsigned kAxisN = 1u;
inline constexpr unsigned kAxisC = 2u;
inline constexpr unsigned kAxisH = 4u;
inline constexpr unsigned kAxisW = 8u;
inline constexpr unsigned kAllAxes = 15u;

enum class PadMode { kZero, kReflect };

// Elementwise binary ops broadcast dimensions of extent 1 against the other
// operand (each dim must match or be 1 on one side).
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> add_scalar(const Tensor<T>& x, std::type_identity_t<T> s);
template <typename T> Tensor<T> mul_scalar(const Tensor<T>& x, std::type_identity_t<T> s);

template <typename T> Tensor<T> neg(const Tensor<T>& x);
template <typename T> Tensor<T> square(const Tensor<T>& x);
template <typename T> Tensor<T> sqrt(const Tensor<T>& x);
template <typename T> Tensor<T> exp(const Tensor<T>& x);
template <typename T> Tensor<T> log(const Tensor<T>& x);
template <typename T> Tensor<T> pow(const Tensor<T>& x, std::type_identity_t<T> exponent);
template <typename T> Tensor<T> abs(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> softplus(const Tensor<T>& x);
template <typename T> Tensor<T> tanh(const Tensor<T>& x);
template <typename T> Tensor<T> leaky_relu(const Tensor<T>& x, std::type_identity_t<T> slope);
// Standard normal CDF.
template <typename T> Tensor<T> normal_cdf(const Tensor<T>& x);
// max(x, lo); gradient flows where x >= lo.
template <typename T> Tensor<T> clamp_min(const Tensor<T>& x, std::type_identity_t<T> lo);
// Nearest integer, ties to even. Not differentiable: the result never
// requires grad.
template <typename T> Tensor<T> round(const Tensor<T>& x);
// Rounded forward value, identity gradient.
template <typename T> Tensor<T> round_ste(const Tensor<T>& x);

// Reductions accumulate in double regardless of T.
template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> sum(const Tensor<T>& x, unsigned axes);
template <typename T> Tensor<T> mean(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x, unsigned axes);

template <typename T> Tensor<T> softmax(const Tensor<T>& x, int axis);
// 2x2 average pooling with stride 2; H and W must be even.
template <typename T> Tensor<T> avg_pool2d(const Tensor<T>& x);
// Batched over the first two dims (broadcast when one side is 1):
// [A,B,m,k] x [A,B,k,n] -> [A,B,m,n].
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T> Tensor<T> permute(const Tensor<T>& x, std::array<int, 4> order);
template <typename T> Tensor<T> transpose(const Tensor<T>& x, int axis_a, int axis_b);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);
template <typename T> Tensor<T> slice(const Tensor<T>& x, int axis, int64_t start, int64_t length);

// out[i] = indices[i] < 0 ? 0 : x.data()[indices[i]]. Backward scatter-adds,
// so overlapping gathers (e.g. overlapping blocks) are handled.
template <typename T>
Tensor<T> gather(const Tensor<T>& x, Shape out_shape, std::vector<int64_t> indices);

// Spatial padding. kReflect mirrors without repeating the edge and requires
// pad < extent on that axis.
template <typename T>
Tensor<T> pad2d(const Tensor<T>& x, int64_t top, int64_t bottom, int64_t left, int64_t right,
                PadMode mode);
// Reflection that keeps mirroring past the far edge, so any pad amount is
// allowed (a 1-pixel axis becomes a replicated one).
template <typename T>
Tensor<T> mirror_pad2d(const Tensor<T>& x, int64_t bottom, int64_t right);
template <typename T>
Tensor<T> crop2d(const Tensor<T>& x, int64_t top, int64_t left, int64_t height, int64_t width);

// input N x Cin x H x W, weight Cout x Cin x kh x kw, bias Cout (any shape
// with Cout elements) or undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 int stride, int pad, PadMode mode = PadMode::kZero);
// input N x Cin x H x W, weight Cin x Cout x k x k.
// Output extent stride*(H-1) + k - 2*pad + output_padding.
template <typename T>
Tensor<T> conv2d_transpose(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                           int stride, int pad, int output_padding = 0);

template <typename T> Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <typename T> Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }
template <typename T> Tensor<T> operator/(const Tensor<T>& a, const Tensor<T>& b) { return div(a, b); }
template <typename T> Tensor<T> operator-(const Tensor<T>& x) { return neg(x); }
template <typename T> Tensor<T> operator+(const Tensor<T>& x, std::type_identity_t<T> s) { return add_scalar(x, s); }
template <typename T> Tensor<T> operator-(const Tensor<T>& x, std::type_identity_t<T> s) { return add_scalar(x, -s); }
template <typename T> Tensor<T> operator*(const Tensor<T>& x, std::type_identity_t<T> s) { return mul_scalar(x, s); }
template <typename T> Tensor<T> operator*(std::type_identity_t<T> s, const Tensor<T>& x) { return mul_scalar(x, s); }

// Index that mirrors i into [0, n) with period 2(n-1); n == 1 maps to 0.
int64_t mirror_index(int64_t i, int64_t n);

}  // namespace cwic

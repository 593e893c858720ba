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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cwic/cwam/cwam.h"
#include "cwic/tensor/ops.h"
#include "cwic/tensor/params.h"
#include "cwic/tensor/tensor.h"

namespace cwic {

inline constexpr double kLeakySlope = 0.01;
inline constexpr double kGdnBetaMin = 1e-6;

// Weights and geometry of one convolution. For transposed convolutions the
// weight is Cin x Cout x k x k.
template <typename T>
struct ConvParams {
  Tensor<T> weight;
  Tensor<T> bias;
  int stride = 1;
  int pad = 0;
  bool transposed = false;
  int output_padding = 0;

  // "Same" padding (k / 2). Uniform init with bound 1 / sqrt(fan_in).
  static ConvParams create(int64_t cin, int64_t cout, int k, int stride, Rng& rng);
  static ConvParams create_transposed(int64_t cin, int64_t cout, int k, int stride, Rng& rng);

  int64_t in_channels() const { return transposed ? weight.dim(0) : weight.dim(1); }
  int64_t out_channels() const { return transposed ? weight.dim(1) : weight.dim(0); }
  void zero();
  void visit(const std::string& prefix, const ParamVisitor<T>& visitor);
};

template <typename T>
Tensor<T> apply_conv(const Tensor<T>& x, const ConvParams<T>& p);

// beta = beta_raw^2 + beta_min, gamma = gamma_raw^2.
template <typename T>
struct GdnParams {
  Tensor<T> beta_raw;   // [1, C, 1, 1]
  Tensor<T> gamma_raw;  // [C, C, 1, 1]
  bool inverse = false;

  // beta = 1, gamma = 0.1 I with a small off-diagonal so it can learn.
  static GdnParams create(int64_t channels, bool inverse);

  int64_t channels() const { return beta_raw.dim(1); }
  Tensor<T> beta() const;
  Tensor<T> gamma() const;
  // Sets the raw values so the reparameterized beta / gamma equal the
  // targets (exactly when representable). beta has C values, gamma C*C.
  void set_beta(const std::vector<double>& beta);
  void set_gamma(const std::vector<double>& gamma);
  void visit(const std::string& prefix, const ParamVisitor<T>& visitor);
};

// y_i = x_i / sqrt(beta_i + sum_j gamma_ij x_j^2); the inverse multiplies.
template <typename T>
Tensor<T> gdn(const Tensor<T>& x, const GdnParams<T>& p);

template <typename T>
struct DenseBlockParams {
  ConvParams<T> conv1;  // 1x1, C -> g
  ConvParams<T> conv2;  // 3x3, C + g -> g
  ConvParams<T> conv3;  // 1x1, C + 2g -> C

  // growth <= 0 picks ceil(C / 2).
  static DenseBlockParams create(int64_t channels, int64_t growth, Rng& rng);

  int64_t channels() const { return conv1.in_channels(); }
  int64_t growth() const { return conv1.out_channels(); }
  void visit(const std::string& prefix, const ParamVisitor<T>& visitor);
};

template <typename T>
Tensor<T> dense_block(const Tensor<T>& x, const DenseBlockParams<T>& p);

template <typename T>
struct ResidualBlockParams {
  ConvParams<T> conv1;  // 1x1
  ConvParams<T> conv2;  // 3x3
  ConvParams<T> conv3;  // 1x1
  std::optional<CwamParams<T>> cwam;

  static ResidualBlockParams create(int64_t channels, bool with_cwam, int heads, int window,
                                    Rng& rng);
  void visit(const std::string& prefix, const ParamVisitor<T>& visitor);
};

// Inner branch f(x): 1x1 -> leaky -> 3x3 -> leaky -> 1x1 [-> CWAM].
template <typename T>
Tensor<T> residual_branch(const Tensor<T>& x, const ResidualBlockParams<T>& p);

// x + f(x).
template <typename T>
Tensor<T> residual_block(const Tensor<T>& x, const ResidualBlockParams<T>& p);

}  // namespace cwic

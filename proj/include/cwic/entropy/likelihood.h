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
#include <span>
#include <string>
#include <vector>

#include "cwic/tensor/params.h"
#include "cwic/tensor/tensor.h"

namespace cwic {

inline constexpr double kLikelihoodFloor = 0x1.0p-50;
inline constexpr double kSigmaMin = 0.11;

// P(y_hat) under N(mu, sigma^2) integrated over [y_hat - 1/2, y_hat + 1/2],
// floored at 2^-50. Evaluated on |y_hat - mu| so both CDF arguments sit in
// the lower tail, where erfc keeps full relative precision.
template <typename T>
Tensor<T> gaussian_likelihood(const Tensor<T>& y_hat, const Tensor<T>& mu, const Tensor<T>& sigma);

// Learned per-channel monotone CDF for the hyper-latents: a chain of
// 1 -> 3 -> 3 -> 3 -> 3 -> 1 maps with softplus-positive matrices and
// tanh-gated residuals, so the logit is increasing in its input.
template <typename T>
struct FactorizedPrior {
  std::vector<Tensor<T>> matrices;  // [1, C, out, in], used through softplus
  std::vector<Tensor<T>> biases;    // [1, C, out, 1]
  std::vector<Tensor<T>> factors;   // [1, C, out, 1], used through tanh

  static FactorizedPrior create(int64_t channels, Rng& rng, double init_scale = 10.0);

  int64_t channels() const { return matrices.front().dim(1); }
  // points [1, C, 1, K] -> CDF logits of the same shape.
  Tensor<T> logits(const Tensor<T>& points) const;
  void visit(const std::string& prefix, const ParamVisitor<T>& visitor);
};

// P(z_hat) = c(z_hat + 1/2) - c(z_hat - 1/2) per channel, floored at 2^-50.
template <typename T>
Tensor<T> factorized_likelihood(const Tensor<T>& z_hat, const FactorizedPrior<T>& prior);

// CDF c(x) of every channel at the given points, evaluated without a graph.
// Returns C rows of points.size() values.
template <typename T>
std::vector<std::vector<double>> factorized_cdf(const FactorizedPrior<T>& prior,
                                                const std::vector<double>& points);

// Differentiable sum of -log2 p over all elements (scalar) or per batch row
// ([N, 1, 1, 1]).
template <typename T>
Tensor<T> rate_bits(const Tensor<T>& p);
template <typename T>
Tensor<T> rate_bits_per_row(const Tensor<T>& p);

// Plain-number versions. p must lie in (0, 1].
template <typename T>
double rate_bits(std::span<const T> p);
double bits_per_pixel(double bits, int64_t width, int64_t height);

}  // namespace cwic

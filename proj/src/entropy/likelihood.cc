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

#include "cwic/entropy/likelihood.h"

#include <cmath>
#include <numbers>

#include "cwic/errors.h"
#include "cwic/tensor/ops.h"

namespace cwic {

template <typename T>
Tensor<T> gaussian_likelihood(const Tensor<T>& y_hat, const Tensor<T>& mu, const Tensor<T>& sigma) {
  const Tensor<T> d = abs(sub(y_hat, mu));
  const Tensor<T> upper = normal_cdf(div(add_scalar(neg(d), T(0.5)), sigma));
  const Tensor<T> lower = normal_cdf(div(add_scalar(neg(d), T(-0.5)), sigma));
  return clamp_min(sub(upper, lower), static_cast<T>(kLikelihoodFloor));
}

namespace {
constexpr int kPriorDims[] = {1, 3, 3, 3, 3, 1};
constexpr int kPriorLayers = 5;
}  // namespace

template <typename T>
FactorizedPrior<T> FactorizedPrior<T>::create(int64_t channels, Rng& rng, double init_scale) {
  if (channels <= 0) throw ConfigError("factorized prior: channel count must be positive");
  const double scale = std::pow(init_scale, 1.0 / kPriorLayers);
  FactorizedPrior p;
  for (int k = 0; k < kPriorLayers; ++k) {
    const int in = kPriorDims[k], out = kPriorDims[k + 1];
    const double init = std::log(std::expm1(1.0 / scale / out));
    p.matrices.push_back(constant_parameter<T>(Shape{1, channels, out, in}, init));
    p.biases.push_back(uniform_parameter<T>(Shape{1, channels, out, 1}, 0.5, rng));
    if (k + 1 < kPriorLayers) p.factors.push_back(constant_parameter<T>(Shape{1, channels, out, 1}, 0.0));
  }
  return p;
}

template <typename T>
Tensor<T> FactorizedPrior<T>::logits(const Tensor<T>& points) const {
  if (points.dim(0) != 1 || points.dim(1) != channels() || points.dim(2) != 1) {
    throw DimensionError("factorized prior: points must be [1, C, 1, K], got " + points.shape().str());
  }
  Tensor<T> x = points;
  for (size_t k = 0; k < matrices.size(); ++k) {
    x = add(matmul(softplus(matrices[k]), x), biases[k]);
    if (k < factors.size()) x = add(x, mul(tanh(factors[k]), tanh(x)));
  }
  return x;
}

template <typename T>
void FactorizedPrior<T>::visit(const std::string& prefix, const ParamVisitor<T>& visitor) {
  for (size_t k = 0; k < matrices.size(); ++k) {
    const std::string i = std::to_string(k);
    visitor(join_name(prefix, "matrix" + i), matrices[k]);
    visitor(join_name(prefix, "bias" + i), biases[k]);
    if (k < factors.size()) visitor(join_name(prefix, "factor" + i), factors[k]);
  }
}

template <typename T>
Tensor<T> factorized_likelihood(const Tensor<T>& z_hat, const FactorizedPrior<T>& prior) {
  const Shape& s = z_hat.shape();
  if (s.c() != prior.channels()) {
    throw DimensionError("factorized_likelihood: " + s.str() + " does not have " +
                         std::to_string(prior.channels()) + " channels");
  }
  const Tensor<T> v = reshape(permute(z_hat, {1, 0, 2, 3}), Shape{1, s.c(), 1, s.n() * s.h() * s.w()});
  const Tensor<T> lower = prior.logits(add_scalar(v, T(-0.5)));
  const Tensor<T> upper = prior.logits(add_scalar(v, T(0.5)));
  // Evaluate on the side of the median where the sigmoids are far from 1,
  // which keeps the difference accurate in the tails.
  std::vector<T> sign(static_cast<size_t>(v.numel()));
  for (size_t i = 0; i < sign.size(); ++i) {
    sign[i] = lower.data()[i] + upper.data()[i] > T(0) ? T(-1) : T(1);
  }
  const Tensor<T> s_t(v.shape(), std::move(sign));
  const Tensor<T> p = mul(s_t, sub(sigmoid(mul(s_t, upper)), sigmoid(mul(s_t, lower))));
  const Tensor<T> floored = clamp_min(p, static_cast<T>(kLikelihoodFloor));
  return permute(reshape(floored, Shape{s.c(), s.n(), s.h(), s.w()}), {1, 0, 2, 3});
}

template <typename T>
std::vector<std::vector<double>> factorized_cdf(const FactorizedPrior<T>& prior,
                                                const std::vector<double>& points) {
  NoGradGuard no_grad;
  const int64_t c = prior.channels();
  const int64_t k = static_cast<int64_t>(points.size());
  std::vector<T> v(static_cast<size_t>(c * k));
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t i = 0; i < k; ++i) v[static_cast<size_t>(ch * k + i)] = static_cast<T>(points[static_cast<size_t>(i)]);
  const Tensor<T> cdf = sigmoid(prior.logits(Tensor<T>(Shape{1, c, 1, k}, std::move(v))));
  std::vector<std::vector<double>> out(static_cast<size_t>(c));
  for (int64_t ch = 0; ch < c; ++ch) {
    out[static_cast<size_t>(ch)].assign(cdf.data().begin() + ch * k, cdf.data().begin() + (ch + 1) * k);
  }
  return out;
}

template <typename T>
Tensor<T> rate_bits(const Tensor<T>& p) {
  return mul_scalar(sum(log(p)), static_cast<T>(-1.0 / std::numbers::ln2));
}

template <typename T>
Tensor<T> rate_bits_per_row(const Tensor<T>& p) {
  return mul_scalar(sum(log(p), kAxisC | kAxisH | kAxisW), static_cast<T>(-1.0 / std::numbers::ln2));
}

template <typename T>
double rate_bits(std::span<const T> p) {
  double bits = 0.0;
  for (T v : p) {
    if (!(v > T(0)) || v > T(1)) throw NumericError("rate_bits: probability outside (0, 1]");
    bits -= std::log2(static_cast<double>(v));
  }
  return bits;
}

double bits_per_pixel(double bits, int64_t width, int64_t height) {
  if (width <= 0 || height <= 0) throw ContractError("bits_per_pixel: image has no pixels");
  return bits / (static_cast<double>(width) * static_cast<double>(height));
}

#define CWIC_INSTANTIATE_LIKELIHOOD(T)                                                             \
  template Tensor<T> gaussian_likelihood(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);    \
  template struct FactorizedPrior<T>;                                                              \
  template Tensor<T> factorized_likelihood(const Tensor<T>&, const FactorizedPrior<T>&);           \
  template std::vector<std::vector<double>> factorized_cdf(const FactorizedPrior<T>&,              \
                                                           const std::vector<double>&);            \
  template Tensor<T> rate_bits(const Tensor<T>&);                                                  \
  template Tensor<T> rate_bits_per_row(const Tensor<T>&);                                          \
  template double rate_bits(std::span<const T>);

CWIC_INSTANTIATE_LIKELIHOOD(float)
CWIC_INSTANTIATE_LIKELIHOOD(double)

}  // namespace cwic

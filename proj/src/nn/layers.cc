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

#include "cwic/nn/layers.h"

#include <cmath>
#include <limits>

#include "cwic/errors.h"

namespace cwic {

namespace {

// Raw value r whose reparameterization r*r + floor, evaluated in T the way
// the forward pass does, lands on target (or as close as T allows).
template <typename T>
T raw_for(double target, double floor) {
  if (target < floor) throw ContractError("reparameterized value below its floor");
  T r = static_cast<T>(std::sqrt(target - floor));
  const T want = static_cast<T>(target);
  T best = r;
  double best_err = std::numeric_limits<double>::infinity();
  T lo = r, hi = r;
  for (int i = 0; i < 16; ++i) {
    for (T cand : {lo, hi}) {
      const T got = cand * cand + static_cast<T>(floor);
      const double err = std::abs(static_cast<double>(got) - static_cast<double>(want));
      if (err < best_err) {
        best_err = err;
        best = cand;
      }
    }
    if (best_err == 0.0) break;
    lo = std::nextafter(lo, T(0));
    hi = std::nextafter(hi, std::numeric_limits<T>::infinity());
  }
  return best;
}

template <typename T>
Tensor<T> leaky(const Tensor<T>& x) {
  return leaky_relu(x, static_cast<T>(kLeakySlope));
}

}  // namespace

template <typename T>
ConvParams<T> ConvParams<T>::create(int64_t cin, int64_t cout, int k, int stride, Rng& rng) {
  if (cin <= 0 || cout <= 0 || k <= 0) throw ConfigError("conv: channel counts and kernel must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(cin * k * k));
  ConvParams p;
  p.weight = uniform_parameter<T>(Shape{cout, cin, k, k}, bound, rng);
  p.bias = uniform_parameter<T>(Shape{1, cout, 1, 1}, bound, rng);
  p.stride = stride;
  p.pad = k / 2;
  return p;
}

template <typename T>
ConvParams<T> ConvParams<T>::create_transposed(int64_t cin, int64_t cout, int k, int stride,
                                               Rng& rng) {
  if (cin <= 0 || cout <= 0 || k <= 0) throw ConfigError("conv: channel counts and kernel must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(cout * k * k));
  ConvParams p;
  p.weight = uniform_parameter<T>(Shape{cin, cout, k, k}, bound, rng);
  p.bias = uniform_parameter<T>(Shape{1, cout, 1, 1}, bound, rng);
  p.stride = stride;
  p.pad = k / 2;
  p.transposed = true;
  p.output_padding = stride - 1;
  return p;
}

template <typename T>
void ConvParams<T>::zero() {
  for (auto& v : weight.mutable_data()) v = T(0);
  for (auto& v : bias.mutable_data()) v = T(0);
}

template <typename T>
void ConvParams<T>::visit(const std::string& prefix, const ParamVisitor<T>& visitor) {
  visitor(join_name(prefix, "weight"), weight);
  visitor(join_name(prefix, "bias"), bias);
}

template <typename T>
Tensor<T> apply_conv(const Tensor<T>& x, const ConvParams<T>& p) {
  if (p.transposed) return conv2d_transpose(x, p.weight, p.bias, p.stride, p.pad, p.output_padding);
  return conv2d(x, p.weight, p.bias, p.stride, p.pad);
}

template <typename T>
GdnParams<T> GdnParams<T>::create(int64_t channels, bool inverse) {
  if (channels <= 0) throw ConfigError("gdn: channel count must be positive");
  GdnParams p;
  p.beta_raw = constant_parameter<T>(Shape{1, channels, 1, 1}, 0.0);
  p.gamma_raw = constant_parameter<T>(Shape{channels, channels, 1, 1}, 0.0);
  p.inverse = inverse;
  p.set_beta(std::vector<double>(static_cast<size_t>(channels), 1.0));
  const T diag = raw_for<T>(0.1, 0.0);
  auto g = p.gamma_raw.mutable_data();
  for (int64_t i = 0; i < channels; ++i)
    for (int64_t j = 0; j < channels; ++j)
      g[static_cast<size_t>(i * channels + j)] = i == j ? diag : static_cast<T>(0x1.0p-9);
  return p;
}

template <typename T>
Tensor<T> GdnParams<T>::beta() const {
  return add_scalar(square(beta_raw), static_cast<T>(kGdnBetaMin));
}

template <typename T>
Tensor<T> GdnParams<T>::gamma() const {
  return square(gamma_raw);
}

template <typename T>
void GdnParams<T>::set_beta(const std::vector<double>& beta) {
  auto raw = beta_raw.mutable_data();
  if (beta.size() != raw.size()) throw DimensionError("gdn: beta needs one value per channel");
  for (size_t i = 0; i < raw.size(); ++i) raw[i] = raw_for<T>(beta[i], kGdnBetaMin);
}

template <typename T>
void GdnParams<T>::set_gamma(const std::vector<double>& gamma) {
  auto raw = gamma_raw.mutable_data();
  if (gamma.size() != raw.size()) throw DimensionError("gdn: gamma needs C*C values");
  for (size_t i = 0; i < raw.size(); ++i) raw[i] = raw_for<T>(gamma[i], 0.0);
}

template <typename T>
void GdnParams<T>::visit(const std::string& prefix, const ParamVisitor<T>& visitor) {
  visitor(join_name(prefix, "beta"), beta_raw);
  visitor(join_name(prefix, "gamma"), gamma_raw);
}

template <typename T>
Tensor<T> gdn(const Tensor<T>& x, const GdnParams<T>& p) {
  if (x.dim(1) != p.channels()) {
    throw DimensionError("gdn: input " + x.shape().str() + " does not have " +
                         std::to_string(p.channels()) + " channels");
  }
  const Tensor<T> norm = sqrt(conv2d(square(x), p.gamma(), p.beta(), 1, 0));
  return p.inverse ? mul(x, norm) : div(x, norm);
}

template <typename T>
DenseBlockParams<T> DenseBlockParams<T>::create(int64_t channels, int64_t growth, Rng& rng) {
  if (growth <= 0) growth = (channels + 1) / 2;
  DenseBlockParams p;
  p.conv1 = ConvParams<T>::create(channels, growth, 1, 1, rng);
  p.conv2 = ConvParams<T>::create(channels + growth, growth, 3, 1, rng);
  p.conv3 = ConvParams<T>::create(channels + 2 * growth, channels, 1, 1, rng);
  return p;
}

template <typename T>
void DenseBlockParams<T>::visit(const std::string& prefix, const ParamVisitor<T>& visitor) {
  conv1.visit(join_name(prefix, "conv1"), visitor);
  conv2.visit(join_name(prefix, "conv2"), visitor);
  conv3.visit(join_name(prefix, "conv3"), visitor);
}

template <typename T>
Tensor<T> dense_block(const Tensor<T>& x, const DenseBlockParams<T>& p) {
  if (x.dim(1) != p.channels()) {
    throw DimensionError("dense_block: input " + x.shape().str() + " does not have " +
                         std::to_string(p.channels()) + " channels");
  }
  const Tensor<T> x1 = concat<T>({x, leaky(apply_conv(x, p.conv1))}, 1);
  const Tensor<T> x2 = concat<T>({x1, leaky(apply_conv(x1, p.conv2))}, 1);
  return apply_conv(x2, p.conv3);
}

template <typename T>
ResidualBlockParams<T> ResidualBlockParams<T>::create(int64_t channels, bool with_cwam, int heads,
                                                      int window, Rng& rng) {
  ResidualBlockParams p;
  p.conv1 = ConvParams<T>::create(channels, channels, 1, 1, rng);
  p.conv2 = ConvParams<T>::create(channels, channels, 3, 1, rng);
  p.conv3 = ConvParams<T>::create(channels, channels, 1, 1, rng);
  if (with_cwam) p.cwam = CwamParams<T>::create(channels, heads, window, rng);
  return p;
}

template <typename T>
void ResidualBlockParams<T>::visit(const std::string& prefix, const ParamVisitor<T>& visitor) {
  conv1.visit(join_name(prefix, "conv1"), visitor);
  conv2.visit(join_name(prefix, "conv2"), visitor);
  conv3.visit(join_name(prefix, "conv3"), visitor);
  if (cwam) cwam->visit(join_name(prefix, "cwam"), visitor);
}

template <typename T>
Tensor<T> residual_branch(const Tensor<T>& x, const ResidualBlockParams<T>& p) {
  Tensor<T> h = leaky(apply_conv(x, p.conv1));
  h = leaky(apply_conv(h, p.conv2));
  h = apply_conv(h, p.conv3);
  if (p.cwam) h = cwam_forward(h, *p.cwam);
  return h;
}

template <typename T>
Tensor<T> residual_block(const Tensor<T>& x, const ResidualBlockParams<T>& p) {
  return add(x, residual_branch(x, p));
}

#define CWIC_INSTANTIATE_LAYERS(T)                                                       \
  template struct ConvParams<T>;                                                         \
  template struct GdnParams<T>;                                                          \
  template struct DenseBlockParams<T>;                                                   \
  template struct ResidualBlockParams<T>;                                                \
  template Tensor<T> apply_conv(const Tensor<T>&, const ConvParams<T>&);                 \
  template Tensor<T> gdn(const Tensor<T>&, const GdnParams<T>&);                         \
  template Tensor<T> dense_block(const Tensor<T>&, const DenseBlockParams<T>&);          \
  template Tensor<T> residual_branch(const Tensor<T>&, const ResidualBlockParams<T>&);   \
  template Tensor<T> residual_block(const Tensor<T>&, const ResidualBlockParams<T>&);

CWIC_INSTANTIATE_LAYERS(float)
CWIC_INSTANTIATE_LAYERS(double)

}  // namespace cwic

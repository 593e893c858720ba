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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cwic/cwam/cwam.h"
#include "cwic/entropy/likelihood.h"
#include "cwic/nn/layers.h"
#include "cwic/tensor/params.h"
#include "cwic/tensor/tensor.h"

namespace cwic {

enum class Metric { kMse, kMsSsim };
enum class QuantMode { kNoise, kRound, kSte };

inline constexpr std::array<double, 6> kMseLambdas = {0.0045, 0.00975, 0.0175, 0.0483, 0.09, 0.14};
inline constexpr std::array<double, 3> kMsSsimLambdas = {8.73, 31.73, 60.50};

// Images entering the network must tile by this many pixels.
inline constexpr int64_t kImageMultiple = 64;

const char* metric_name(Metric m);
Metric parse_metric(const std::string& name);  // "mse" or "ms-ssim"

struct ModelConfig {
  int64_t n = 64;      // analysis / synthesis width
  int64_t m = 64;      // latent channels
  int64_t hyper = 0;   // hyper-latent channels, 0 means m / 2
  int window = 4;
  int heads = 4;
  double lambda = 0.0483;
  Metric metric = Metric::kMse;
  uint64_t seed = 0;
  bool use_cwam = true;
  bool use_feature_coding = true;
  int residual_blocks = 2;    // per side
  int64_t feature_growth = 8;

  int64_t hyper_channels() const { return hyper > 0 ? hyper : m / 2; }
  // Throws ConfigError on any invalid field.
  void validate() const;
  // 1-based position in the lambda grid of the metric, 0 when off-grid.
  int lambda_index() const;
};

// lambda for a 1-based quality index; ConfigError when out of range.
double lambda_for_quality(Metric metric, int quality);

// FNV-1a digest of each batch row's values.
template <typename T>
std::vector<uint64_t> row_keys(const Tensor<T>& v);

// noise: v + u with u ~ U(-1/2, 1/2); batch row i draws from a stream
// seeded by (seed, keys[i]), so rows with equal keys get equal noise.
// round: nearest integer, ties to even, no gradient.
// ste: rounded values with an identity gradient.
template <typename T>
Tensor<T> quantize(const Tensor<T>& v, QuantMode mode, uint64_t seed,
                   std::span<const uint64_t> keys);
// Keys taken from v's own rows.
template <typename T>
Tensor<T> quantize(const Tensor<T>& v, QuantMode mode, uint64_t seed = 0);

template <typename T>
struct GaussianParams {
  Tensor<T> mu;
  Tensor<T> sigma;  // >= kSigmaMin
};

template <typename T>
struct LatentState {
  Tensor<T> y;
  Tensor<T> y_hat;
  Tensor<T> z;
  Tensor<T> z_hat;
  QuantMode mode = QuantMode::kRound;
};

// Per-row figures are plain doubles; L is formed as R_bpp + lambda * D from
// them. `loss` is the differentiable batch mean of the same quantity.
struct LossBreakdown {
  double L = 0;
  double R_bpp = 0;
  double D = 0;
  double lambda = 0;
  std::vector<double> row_L;
  std::vector<double> row_R_bpp;
  std::vector<double> row_D;
};

template <typename T>
struct ForwardResult {
  Tensor<T> x_hat;
  LatentState<T> latents;
  GaussianParams<T> gaussian;
  Tensor<T> loss;
  LossBreakdown breakdown;
};

// Intermediate maps of the decoder half, for deviation diagnostics.
template <typename T>
struct DecodeTrace {
  Tensor<T> y_refined;  // after the decoder-side residual blocks
  Tensor<T> x_syn;      // synthesis output before feature decoding
  Tensor<T> x_hat;
};

template <typename T>
struct CodecNet {
  ModelConfig config;

  // Feature coding at image resolution: 3 -> 3 projection plus a dense
  // block residual.
  ConvParams<T> fe_proj;
  DenseBlockParams<T> fe_dense;
  ConvParams<T> fd_proj;
  DenseBlockParams<T> fd_dense;

  std::array<ConvParams<T>, 4> ga_conv;
  std::array<GdnParams<T>, 3> ga_gdn;
  std::optional<CwamParams<T>> ga_cwam_mid;   // after the second GDN
  std::optional<CwamParams<T>> ga_cwam_out;   // after the last conv
  std::vector<ResidualBlockParams<T>> enc_res;

  std::vector<ResidualBlockParams<T>> dec_res;
  std::optional<CwamParams<T>> gs_cwam_in;
  std::optional<CwamParams<T>> gs_cwam_mid;   // after the second deconv
  std::array<ConvParams<T>, 4> gs_conv;
  std::array<GdnParams<T>, 3> gs_gdn;

  std::array<ConvParams<T>, 3> ha_conv;
  std::array<ConvParams<T>, 3> hs_conv;
  FactorizedPrior<T> prior;

  static CodecNet create(const ModelConfig& config);

  // Every parameter in a fixed order with a dotted name.
  void visit(const ParamVisitor<T>& visitor);
  std::vector<Tensor<T>> parameters();
  int64_t parameter_count();

  Tensor<T> feature_encode(const Tensor<T>& x) const;
  Tensor<T> feature_decode(const Tensor<T>& x_syn) const;
  // H, W divisible by 16, else DimensionError.
  Tensor<T> analysis(const Tensor<T>& x_f) const;
  Tensor<T> synthesis(const Tensor<T>& y_hat) const;
  // feature_encode -> g_a -> encoder residual blocks.
  Tensor<T> encode_latent(const Tensor<T>& x) const;
  // decoder residual blocks -> g_s -> feature_decode.
  DecodeTrace<T> decode_latent(const Tensor<T>& y_hat) const;
  // Latent smaller than 4 x 4 is a ConfigError; extents must divide by 4.
  Tensor<T> hyper_analysis(const Tensor<T>& y) const;
  GaussianParams<T> hyper_synthesis(const Tensor<T>& z_hat) const;

  // Whole pipeline with the given latent quantizer. x is [N, 3, H, W]
  // with H, W multiples of 64. Noise keys default to row_keys(x), so the
  // noise follows the image content.
  ForwardResult<T> forward(const Tensor<T>& x, QuantMode mode, uint64_t noise_seed = 0,
                           std::span<const uint64_t> keys = {}) const;
};

// Distortion per row: 255^2 * MSE or 1 - MS-SSIM, shape [N, 1, 1, 1].
template <typename T>
Tensor<T> distortion_per_row(const Tensor<T>& x, const Tensor<T>& x_hat, Metric metric);

// FNV-1a over the configuration and every parameter's name, shape and bytes.
template <typename T>
uint64_t model_hash(CodecNet<T>& net);

}  // namespace cwic

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

#include "cwic/codec/model.h"

#include <cmath>
#include <cstring>
#include <functional>

#include "cwic/errors.h"
#include "cwic/tensor/hash.h"
#include "cwic/tensor/ops.h"
#include "cwic/train/metrics.h"

namespace cwic {

namespace {

template <typename T>
Tensor<T> leaky(const Tensor<T>& x) {
  return leaky_relu(x, static_cast<T>(kLeakySlope));
}

template <typename T>
Tensor<T> maybe_cwam(const Tensor<T>& x, const std::optional<CwamParams<T>>& p) {
  return p ? cwam_forward(x, *p) : x;
}

// Runs one pipeline stage, prefixing numeric failures with its name.
template <typename F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const NumericError& e) {
    throw NumericError(std::string(name) + ": " + e.what());
  }
}

template <typename T>
ConvParams<T> identity_projection(Rng& rng) {
  auto p = ConvParams<T>::create(3, 3, 1, 1, rng);
  auto w = p.weight.mutable_data();
  for (size_t i = 0; i < w.size(); ++i) w[i] = (i % 4 == 0) ? T(1) : T(0);
  for (auto& b : p.bias.mutable_data()) b = T(0);
  return p;
}

}  // namespace

const char* metric_name(Metric m) { return m == Metric::kMse ? "mse" : "ms-ssim"; }

Metric parse_metric(const std::string& name) {
  if (name == "mse") return Metric::kMse;
  if (name == "ms-ssim" || name == "msssim") return Metric::kMsSsim;
  throw ConfigError("unknown metric '" + name + "' (expected mse or ms-ssim)");
}

void ModelConfig::validate() const {
  if (n <= 0 || m <= 0 || hyper < 0) throw ConfigError("channel counts must be positive");
  if (hyper_channels() <= 0) throw ConfigError("hyper channels must be positive");
  if (window < 2 || window % 2 != 0) throw ConfigError("window must be even and >= 2");
  if (heads <= 0) throw ConfigError("heads must be positive");
  if (use_cwam && (n % heads != 0 || m % heads != 0))
    throw ConfigError("channel counts must be divisible by the head count");
  if (!(lambda > 0) || !std::isfinite(lambda)) throw ConfigError("lambda must be positive");
  if (residual_blocks < 0) throw ConfigError("residual block count must be >= 0");
  if (feature_growth <= 0) throw ConfigError("feature growth must be positive");
}

int ModelConfig::lambda_index() const {
  if (metric == Metric::kMse) {
    for (size_t i = 0; i < kMseLambdas.size(); ++i)
      if (kMseLambdas[i] == lambda) return static_cast<int>(i) + 1;
  } else {
    for (size_t i = 0; i < kMsSsimLambdas.size(); ++i)
      if (kMsSsimLambdas[i] == lambda) return static_cast<int>(i) + 1;
  }
  return 0;
}

double lambda_for_quality(Metric metric, int quality) {
  if (metric == Metric::kMse) {
    if (quality < 1 || quality > static_cast<int>(kMseLambdas.size()))
      throw ConfigError("mse quality must be in 1..6");
    return kMseLambdas[static_cast<size_t>(quality - 1)];
  }
  if (quality < 1 || quality > static_cast<int>(kMsSsimLambdas.size()))
    throw ConfigError("ms-ssim quality must be in 1..3");
  return kMsSsimLambdas[static_cast<size_t>(quality - 1)];
}

template <typename T>
std::vector<uint64_t> row_keys(const Tensor<T>& v) {
  const int64_t rows = v.dim(0);
  const size_t row_size = static_cast<size_t>(v.numel() / rows);
  std::vector<uint64_t> keys;
  for (int64_t r = 0; r < rows; ++r) {
    Fnv1a h;
    h.values(v.data().subspan(static_cast<size_t>(r) * row_size, row_size));
    keys.push_back(h.digest());
  }
  return keys;
}

template <typename T>
Tensor<T> quantize(const Tensor<T>& v, QuantMode mode, uint64_t seed) {
  if (mode != QuantMode::kNoise) return quantize(v, mode, seed, {});
  const auto keys = row_keys(v);
  return quantize(v, mode, seed, keys);
}

template <typename T>
Tensor<T> quantize(const Tensor<T>& v, QuantMode mode, uint64_t seed,
                   std::span<const uint64_t> keys) {
  switch (mode) {
    case QuantMode::kRound:
      return round(v);
    case QuantMode::kSte:
      return round_ste(v);
    case QuantMode::kNoise:
      break;
  }
  const int64_t rows = v.dim(0);
  const size_t row_size = static_cast<size_t>(v.numel() / rows);
  if (keys.size() != static_cast<size_t>(rows)) throw ContractError("quantize: one noise key per row");
  std::vector<T> noise(static_cast<size_t>(v.numel()));
  const T below_half = std::nextafter(T(0.5), T(0));
  for (int64_t r = 0; r < rows; ++r) {
    Rng rng(mix_seed(seed, keys[static_cast<size_t>(r)]));
    for (size_t i = 0; i < row_size; ++i) {
      T u = static_cast<T>(rng.uniform(-0.5, 0.5));
      if (u > below_half) u = below_half;
      noise[static_cast<size_t>(r) * row_size + i] = u;
    }
  }
  return add(v, Tensor<T>(v.shape(), std::move(noise)));
}

template <typename T>
CodecNet<T> CodecNet<T>::create(const ModelConfig& config) {
  config.validate();
  CodecNet net;
  net.config = config;
  Rng rng(mix_seed(config.seed, 0x636f6465636e6574ULL));
  const int64_t n = config.n, m = config.m, ch = config.hyper_channels();
  const bool attn = config.use_cwam;

  if (config.use_feature_coding) {
    net.fe_proj = identity_projection<T>(rng);
    net.fe_dense = DenseBlockParams<T>::create(3, config.feature_growth, rng);
  }

  net.ga_conv[0] = ConvParams<T>::create(3, n, 5, 2, rng);
  net.ga_conv[1] = ConvParams<T>::create(n, n, 5, 2, rng);
  net.ga_conv[2] = ConvParams<T>::create(n, n, 5, 2, rng);
  net.ga_conv[3] = ConvParams<T>::create(n, m, 5, 2, rng);
  for (auto& g : net.ga_gdn) g = GdnParams<T>::create(n, false);
  if (attn) {
    net.ga_cwam_mid = CwamParams<T>::create(n, config.heads, config.window, rng);
    net.ga_cwam_out = CwamParams<T>::create(m, config.heads, config.window, rng);
  }
  for (int i = 0; i < config.residual_blocks; ++i)
    net.enc_res.push_back(ResidualBlockParams<T>::create(
        m, attn && i == config.residual_blocks - 1, config.heads, config.window, rng));

  for (int i = 0; i < config.residual_blocks; ++i)
    net.dec_res.push_back(
        ResidualBlockParams<T>::create(m, attn && i == 0, config.heads, config.window, rng));
  if (attn) {
    net.gs_cwam_in = CwamParams<T>::create(m, config.heads, config.window, rng);
    net.gs_cwam_mid = CwamParams<T>::create(n, config.heads, config.window, rng);
  }
  net.gs_conv[0] = ConvParams<T>::create_transposed(m, n, 5, 2, rng);
  net.gs_conv[1] = ConvParams<T>::create_transposed(n, n, 5, 2, rng);
  net.gs_conv[2] = ConvParams<T>::create_transposed(n, n, 5, 2, rng);
  net.gs_conv[3] = ConvParams<T>::create_transposed(n, 3, 5, 2, rng);
  for (auto& g : net.gs_gdn) g = GdnParams<T>::create(n, true);

  if (config.use_feature_coding) {
    net.fd_proj = identity_projection<T>(rng);
    net.fd_dense = DenseBlockParams<T>::create(3, config.feature_growth, rng);
  }

  net.ha_conv[0] = ConvParams<T>::create(m, ch, 3, 1, rng);
  net.ha_conv[1] = ConvParams<T>::create(ch, ch, 5, 2, rng);
  net.ha_conv[2] = ConvParams<T>::create(ch, ch, 5, 2, rng);
  net.hs_conv[0] = ConvParams<T>::create_transposed(ch, m, 5, 2, rng);
  net.hs_conv[1] = ConvParams<T>::create_transposed(m, m, 5, 2, rng);
  net.hs_conv[2] = ConvParams<T>::create(m, 2 * m, 3, 1, rng);
  net.prior = FactorizedPrior<T>::create(ch, rng);
  return net;
}

template <typename T>
void CodecNet<T>::visit(const ParamVisitor<T>& visitor) {
  if (config.use_feature_coding) {
    fe_proj.visit("fe.proj", visitor);
    fe_dense.visit("fe.dense", visitor);
  }
  for (size_t i = 0; i < 4; ++i) ga_conv[i].visit("ga.conv" + std::to_string(i), visitor);
  for (size_t i = 0; i < 3; ++i) ga_gdn[i].visit("ga.gdn" + std::to_string(i), visitor);
  if (ga_cwam_mid) ga_cwam_mid->visit("ga.cwam_mid", visitor);
  if (ga_cwam_out) ga_cwam_out->visit("ga.cwam_out", visitor);
  for (size_t i = 0; i < enc_res.size(); ++i) enc_res[i].visit("enc_res" + std::to_string(i), visitor);
  for (size_t i = 0; i < dec_res.size(); ++i) dec_res[i].visit("dec_res" + std::to_string(i), visitor);
  if (gs_cwam_in) gs_cwam_in->visit("gs.cwam_in", visitor);
  if (gs_cwam_mid) gs_cwam_mid->visit("gs.cwam_mid", visitor);
  for (size_t i = 0; i < 4; ++i) gs_conv[i].visit("gs.conv" + std::to_string(i), visitor);
  for (size_t i = 0; i < 3; ++i) gs_gdn[i].visit("gs.gdn" + std::to_string(i), visitor);
  if (config.use_feature_coding) {
    fd_proj.visit("fd.proj", visitor);
    fd_dense.visit("fd.dense", visitor);
  }
  for (size_t i = 0; i < 3; ++i) ha_conv[i].visit("ha.conv" + std::to_string(i), visitor);
  for (size_t i = 0; i < 3; ++i) hs_conv[i].visit("hs.conv" + std::to_string(i), visitor);
  prior.visit("prior", visitor);
}

template <typename T>
std::vector<Tensor<T>> CodecNet<T>::parameters() {
  std::vector<Tensor<T>> out;
  visit([&](const std::string&, Tensor<T>& t) { out.push_back(t); });
  return out;
}

template <typename T>
int64_t CodecNet<T>::parameter_count() {
  int64_t total = 0;
  visit([&](const std::string&, Tensor<T>& t) { total += t.numel(); });
  return total;
}

template <typename T>
Tensor<T> CodecNet<T>::feature_encode(const Tensor<T>& x) const {
  if (!config.use_feature_coding) return x;
  const Tensor<T> p = apply_conv(x, fe_proj);
  return add(p, dense_block(p, fe_dense));
}

template <typename T>
Tensor<T> CodecNet<T>::feature_decode(const Tensor<T>& x_syn) const {
  if (!config.use_feature_coding) return x_syn;
  const Tensor<T> p = apply_conv(x_syn, fd_proj);
  return add(p, dense_block(p, fd_dense));
}

template <typename T>
Tensor<T> CodecNet<T>::analysis(const Tensor<T>& x_f) const {
  if (x_f.dim(2) % 16 != 0 || x_f.dim(3) % 16 != 0)
    throw DimensionError("analysis transform needs H and W divisible by 16, got " + x_f.shape().str());
  Tensor<T> h = gdn(apply_conv(x_f, ga_conv[0]), ga_gdn[0]);
  h = gdn(apply_conv(h, ga_conv[1]), ga_gdn[1]);
  h = maybe_cwam(h, ga_cwam_mid);
  h = gdn(apply_conv(h, ga_conv[2]), ga_gdn[2]);
  return maybe_cwam(apply_conv(h, ga_conv[3]), ga_cwam_out);
}

template <typename T>
Tensor<T> CodecNet<T>::synthesis(const Tensor<T>& y_hat) const {
  Tensor<T> h = maybe_cwam(y_hat, gs_cwam_in);
  h = gdn(apply_conv(h, gs_conv[0]), gs_gdn[0]);
  h = maybe_cwam(apply_conv(h, gs_conv[1]), gs_cwam_mid);
  h = gdn(h, gs_gdn[1]);
  h = gdn(apply_conv(h, gs_conv[2]), gs_gdn[2]);
  return apply_conv(h, gs_conv[3]);
}

template <typename T>
Tensor<T> CodecNet<T>::encode_latent(const Tensor<T>& x) const {
  if (x.dim(1) != 3) throw DimensionError("expected a 3-channel image, got " + x.shape().str());
  Tensor<T> y = stage("feature_encode", [&] { return feature_encode(x); });
  y = stage("analysis", [&] { return analysis(y); });
  return stage("encoder_residual", [&] {
    Tensor<T> r = y;
    for (const auto& b : enc_res) r = residual_block(r, b);
    return r;
  });
}

template <typename T>
DecodeTrace<T> CodecNet<T>::decode_latent(const Tensor<T>& y_hat) const {
  DecodeTrace<T> t;
  t.y_refined = stage("decoder_residual", [&] {
    Tensor<T> r = y_hat;
    for (const auto& b : dec_res) r = residual_block(r, b);
    return r;
  });
  t.x_syn = stage("synthesis", [&] { return synthesis(t.y_refined); });
  t.x_hat = stage("feature_decode", [&] { return feature_decode(t.x_syn); });
  return t;
}

template <typename T>
Tensor<T> CodecNet<T>::hyper_analysis(const Tensor<T>& y) const {
  if (y.dim(2) < 4 || y.dim(3) < 4)
    throw ConfigError("latent " + y.shape().str() + " is smaller than 4x4; use a larger image");
  if (y.dim(2) % 4 != 0 || y.dim(3) % 4 != 0)
    throw DimensionError("hyper analysis needs latent extents divisible by 4, got " + y.shape().str());
  Tensor<T> h = leaky(apply_conv(abs(y), ha_conv[0]));
  h = leaky(apply_conv(h, ha_conv[1]));
  return apply_conv(h, ha_conv[2]);
}

template <typename T>
GaussianParams<T> CodecNet<T>::hyper_synthesis(const Tensor<T>& z_hat) const {
  Tensor<T> h = leaky(apply_conv(z_hat, hs_conv[0]));
  h = leaky(apply_conv(h, hs_conv[1]));
  h = apply_conv(h, hs_conv[2]);
  const int64_t m = config.m;
  GaussianParams<T> gp;
  gp.mu = slice(h, 1, 0, m);
  gp.sigma = clamp_min(exp(slice(h, 1, m, m)), static_cast<T>(kSigmaMin));
  return gp;
}

template <typename T>
Tensor<T> distortion_per_row(const Tensor<T>& x, const Tensor<T>& x_hat, Metric metric) {
  if (metric == Metric::kMse) return mul_scalar(mse_per_row(x, x_hat), static_cast<T>(255.0 * 255.0));
  const int scales = ms_ssim_max_scales(x.dim(2), x.dim(3));
  return add_scalar(neg(ms_ssim(x, x_hat, scales)), T(1));
}

template <typename T>
ForwardResult<T> CodecNet<T>::forward(const Tensor<T>& x, QuantMode mode, uint64_t noise_seed,
                                      std::span<const uint64_t> keys) const {
  if (x.dim(2) % kImageMultiple != 0 || x.dim(3) % kImageMultiple != 0)
    throw DimensionError("network input must tile by 64 pixels, got " + x.shape().str());
  std::vector<uint64_t> own_keys;
  if (keys.empty()) {
    own_keys = row_keys(x);
    keys = own_keys;
  }
  ForwardResult<T> r;
  r.latents.mode = mode;
  r.latents.y = encode_latent(x);
  r.latents.z = stage("hyper_analysis", [&] { return hyper_analysis(r.latents.y); });
  r.latents.z_hat = quantize(r.latents.z, mode, mix_seed(noise_seed, 1), keys);
  r.gaussian = stage("hyper_synthesis", [&] { return hyper_synthesis(r.latents.z_hat); });
  r.latents.y_hat = quantize(r.latents.y, mode, mix_seed(noise_seed, 2), keys);

  const Tensor<T> rate = stage("rate", [&] {
    const Tensor<T> bits_y = rate_bits_per_row(gaussian_likelihood(r.latents.y_hat, r.gaussian.mu, r.gaussian.sigma));
    const Tensor<T> bits_z = rate_bits_per_row(factorized_likelihood(r.latents.z_hat, prior));
    return mul_scalar(add(bits_y, bits_z), static_cast<T>(1.0 / static_cast<double>(x.dim(2) * x.dim(3))));
  });
  r.x_hat = decode_latent(r.latents.y_hat).x_hat;
  const Tensor<T> dist = stage("distortion", [&] { return distortion_per_row(x, r.x_hat, config.metric); });
  r.loss = stage("loss", [&] {
    return mean(add(rate, mul_scalar(dist, static_cast<T>(config.lambda))));
  });

  LossBreakdown& b = r.breakdown;
  b.lambda = config.lambda;
  const int64_t rows = x.dim(0);
  for (int64_t i = 0; i < rows; ++i) {
    const double rb = static_cast<double>(rate.data()[static_cast<size_t>(i)]);
    const double d = static_cast<double>(dist.data()[static_cast<size_t>(i)]);
    b.row_R_bpp.push_back(rb);
    b.row_D.push_back(d);
    b.row_L.push_back(rb + config.lambda * d);
    b.R_bpp += rb / static_cast<double>(rows);
    b.D += d / static_cast<double>(rows);
  }
  b.L = b.R_bpp + config.lambda * b.D;
  return r;
}

template <typename T>
uint64_t model_hash(CodecNet<T>& net) {
  Fnv1a h;
  const ModelConfig& c = net.config;
  h.text(sizeof(T) == 4 ? "f32" : "f64");
  h.value(c.n);
  h.value(c.m);
  h.value(c.hyper_channels());
  h.value(c.window);
  h.value(c.heads);
  h.value(c.lambda);
  h.value(static_cast<int32_t>(c.metric));
  h.value(static_cast<uint8_t>(c.use_cwam));
  h.value(static_cast<uint8_t>(c.use_feature_coding));
  h.value(c.residual_blocks);
  h.value(c.feature_growth);
  net.visit([&](const std::string& name, Tensor<T>& t) {
    h.text(name);
    for (int i = 0; i < 4; ++i) h.value(t.dim(i));
    h.values(t.data());
  });
  return h.digest();
}

#define CWIC_INSTANTIATE(T)                                                                  \
  template std::vector<uint64_t> row_keys(const Tensor<T>&);                                 \
  template Tensor<T> quantize(const Tensor<T>&, QuantMode, uint64_t);                        \
  template Tensor<T> quantize(const Tensor<T>&, QuantMode, uint64_t, std::span<const uint64_t>); \
  template struct CodecNet<T>;                                                               \
  template Tensor<T> distortion_per_row(const Tensor<T>&, const Tensor<T>&, Metric);         \
  template uint64_t model_hash(CodecNet<T>&);

CWIC_INSTANTIATE(float)
CWIC_INSTANTIATE(double)

}  // namespace cwic

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

#include "cwic/codec/image_codec.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "cwic/errors.h"
#include "cwic/tensor/ops.h"

namespace cwic {

namespace {

constexpr double kMaxSymbol = 0x1.0p30;

template <typename T>
std::vector<int32_t> to_symbols(const Tensor<T>& v, const char* what) {
  std::vector<int32_t> out;
  out.reserve(static_cast<size_t>(v.numel()));
  for (T x : v.data()) {
    if (!(std::abs(static_cast<double>(x)) < kMaxSymbol))
      throw NumericError(std::string(what) + ": latent value outside the codable range");
    out.push_back(static_cast<int32_t>(x));
  }
  return out;
}

template <typename T>
Tensor<T> from_symbols(Shape shape, const std::vector<int32_t>& s) {
  std::vector<T> v(s.begin(), s.end());
  return Tensor<T>(shape, std::move(v));
}

template <typename T>
std::vector<CdfTable> z_tables(const CodecNet<T>& net, Shape z_shape) {
  const auto per_channel = factorized_tables(net.prior);
  std::vector<CdfTable> out;
  out.reserve(static_cast<size_t>(z_shape.numel()));
  for (int64_t n = 0; n < z_shape.n(); ++n)
    for (int64_t c = 0; c < z_shape.c(); ++c)
      for (int64_t i = 0; i < z_shape.h() * z_shape.w(); ++i) out.push_back(per_channel[static_cast<size_t>(c)]);
  return out;
}

template <typename T>
Tensor<T> finish_image(const Tensor<T>& x_hat, int64_t height, int64_t width) {
  const Tensor<T> cropped = crop2d(x_hat, 0, 0, height, width);
  std::vector<T> v(cropped.data().begin(), cropped.data().end());
  for (auto& p : v) p = std::clamp(p, T(0), T(1));
  return Tensor<T>(cropped.shape(), std::move(v));
}

}  // namespace

template <typename T>
Tensor<T> pad_to_multiple(const Tensor<T>& x) {
  const int64_t h = x.dim(2), w = x.dim(3);
  const int64_t ph = (h + kImageMultiple - 1) / kImageMultiple * kImageMultiple;
  const int64_t pw = (w + kImageMultiple - 1) / kImageMultiple * kImageMultiple;
  if (ph == h && pw == w) return x;
  return mirror_pad2d(x, ph - h, pw - w);
}

template <typename T>
std::vector<CdfTable> gaussian_tables(const GaussianParams<T>& gp) {
  std::vector<CdfTable> out;
  out.reserve(static_cast<size_t>(gp.mu.numel()));
  for (int64_t i = 0; i < gp.mu.numel(); ++i)
    out.push_back(gaussian_table(static_cast<double>(gp.mu.data()[static_cast<size_t>(i)]),
                                 static_cast<double>(gp.sigma.data()[static_cast<size_t>(i)])));
  return out;
}

template <typename T>
EncodeResult<T> encode_image(CodecNet<T>& net, const Tensor<T>& x) {
  if (x.dim(0) != 1 || x.dim(1) != 3) throw DimensionError("encode_image expects [1, 3, H, W], got " + x.shape().str());
  NoGradGuard no_grad;
  const Tensor<T> padded = pad_to_multiple(x);
  EncodeResult<T> r;
  const Tensor<T> y = net.encode_latent(padded);
  r.z_hat = round(net.hyper_analysis(y));
  const GaussianParams<T> gp = net.hyper_synthesis(r.z_hat);
  r.y_hat = round(y);

  const auto z_sym = to_symbols(r.z_hat, "z");
  const auto y_sym = to_symbols(r.y_hat, "y");
  const auto zt = z_tables(net, r.z_hat.shape());
  const auto yt = gaussian_tables(gp);
  r.stream.z_bytes = rc_encode(z_sym, zt);
  r.stream.y_bytes = rc_encode(y_sym, yt);

  StreamHeader& h = r.stream.header;
  h.width = static_cast<uint32_t>(x.dim(3));
  h.height = static_cast<uint32_t>(x.dim(2));
  h.padded_width = static_cast<uint32_t>(padded.dim(3));
  h.padded_height = static_cast<uint32_t>(padded.dim(2));
  h.model_hash = model_hash(net);
  h.lambda_index = static_cast<uint8_t>(net.config.lambda_index());
  r.bytes = serialize(r.stream);

  r.y_model_bits = rate_bits(gaussian_likelihood(r.y_hat, gp.mu, gp.sigma)).item();
  r.z_model_bits = rate_bits(factorized_likelihood(r.z_hat, net.prior)).item();
  r.x_hat = finish_image(net.decode_latent(r.y_hat).x_hat, x.dim(2), x.dim(3));
  return r;
}

template <typename T>
DecodeResult<T> decode_image(CodecNet<T>& net, std::span<const uint8_t> bytes) {
  const CodecBitstream s = parse_bitstream(bytes);
  if (s.header.model_hash != model_hash(net))
    throw ModelMismatchError("bitstream was produced by a different model (hash mismatch)");
  NoGradGuard no_grad;
  DecodeResult<T> r;
  r.header = s.header;
  const int64_t ph = s.header.padded_height, pw = s.header.padded_width;
  const Shape z_shape{1, net.config.hyper_channels(), ph / 64, pw / 64};
  const Shape y_shape{1, net.config.m, ph / 16, pw / 16};
  r.z_hat = from_symbols<T>(z_shape, rc_decode(s.z_bytes, z_tables(net, z_shape)));
  const GaussianParams<T> gp = net.hyper_synthesis(r.z_hat);
  r.y_hat = from_symbols<T>(y_shape, rc_decode(s.y_bytes, gaussian_tables(gp)));
  r.x_hat = finish_image(net.decode_latent(r.y_hat).x_hat, s.header.height, s.header.width);
  return r;
}

double stream_bpp(size_t stream_bytes, int64_t width, int64_t height) {
  return bits_per_pixel(8.0 * static_cast<double>(stream_bytes), width, height);
}

#define CWIC_INSTANTIATE(T)                                                          \
  template Tensor<T> pad_to_multiple(const Tensor<T>&);                              \
  template std::vector<CdfTable> gaussian_tables(const GaussianParams<T>&);          \
  template EncodeResult<T> encode_image(CodecNet<T>&, const Tensor<T>&);             \
  template DecodeResult<T> decode_image(CodecNet<T>&, std::span<const uint8_t>);

CWIC_INSTANTIATE(float)
CWIC_INSTANTIATE(double)

}  // namespace cwic

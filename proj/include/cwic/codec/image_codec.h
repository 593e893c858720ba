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
#include <vector>

#include "cwic/codec/model.h"
#include "cwic/entropy/bitstream.h"
#include "cwic/entropy/cdf.h"

namespace cwic {

// Mirror-pads bottom/right up to the next multiple of kImageMultiple.
template <typename T>
Tensor<T> pad_to_multiple(const Tensor<T>& x);

// One Gaussian table per latent element, in NCHW order.
template <typename T>
std::vector<CdfTable> gaussian_tables(const GaussianParams<T>& gp);

template <typename T>
struct EncodeResult {
  CodecBitstream stream;
  std::vector<uint8_t> bytes;  // serialized stream
  Tensor<T> y_hat;
  Tensor<T> z_hat;
  Tensor<T> x_hat;  // encoder-side reconstruction, cropped and clamped
  double y_model_bits = 0;  // -sum log2 p under the Gaussian model
  double z_model_bits = 0;
};

template <typename T>
struct DecodeResult {
  StreamHeader header;
  Tensor<T> y_hat;
  Tensor<T> z_hat;
  Tensor<T> x_hat;  // cropped to the original size, clamped to [0, 1]
};

// x is [1, 3, H, W] in [0, 1], any H, W >= 1.
template <typename T>
EncodeResult<T> encode_image(CodecNet<T>& net, const Tensor<T>& x);

// ModelMismatchError when the stream names another model; DecodeError for
// malformed streams. Uses only the bytes and the network.
template <typename T>
DecodeResult<T> decode_image(CodecNet<T>& net, std::span<const uint8_t> bytes);

// bits / (width * height) with the file's bit count.
double stream_bpp(size_t stream_bytes, int64_t width, int64_t height);

}  // namespace cwic

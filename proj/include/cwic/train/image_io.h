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
#include <filesystem>
#include <span>
#include <vector>

#include "cwic/tensor/rng.h"
#include "cwic/tensor/tensor.h"

namespace cwic {

// Images are [1, 3, H, W] float tensors with values in [0, 1].
using ImageTensor = Tensor<float>;

// PNG (any bit depth, converted to 8-bit RGB) or binary PPM/PGM (P6/P5,
// maxval up to 65535), detected from the leading bytes. Gray images are
// replicated to three channels. IngestError on anything else or on
// truncated data.
ImageTensor decode_image_bytes(std::span<const uint8_t> bytes);
ImageTensor load_image(const std::filesystem::path& path);

// 8-bit RGB. The format follows the extension: ".png", else binary PPM.
std::vector<uint8_t> encode_png(const ImageTensor& img);
std::vector<uint8_t> encode_ppm(const ImageTensor& img);
void save_image(const std::filesystem::path& path, const ImageTensor& img);

// round(clamp(v, 0, 1) * 255) / 255: what an 8-bit file stores.
ImageTensor quantize_8bit(const ImageTensor& img);

// Images smaller than the crop on either axis are excluded from training.
bool crop_fits(int64_t height, int64_t width, int64_t size);
// size x size window at a uniform position; IngestError when it does not fit.
ImageTensor random_crop(const ImageTensor& img, int64_t size, Rng& rng);
ImageTensor hflip(const ImageTensor& img);

// Regular files with a .png/.ppm/.pgm/.pnm extension, sorted by name.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

// Smooth gradients, soft-edged discs and stripes plus mild noise.
ImageTensor synthetic_image(int64_t height, int64_t width, uint64_t seed);

}  // namespace cwic

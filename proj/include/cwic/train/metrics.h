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

#include "cwic/tensor/tensor.h"

namespace cwic {

inline constexpr std::array<double, 5> kMsSsimWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;
inline constexpr double kPsnrCap = 100.0;

// Mean squared error per batch row: [N, 1, 1, 1].
template <typename T>
Tensor<T> mse_per_row(const Tensor<T>& x, const Tensor<T>& x_hat);

// Largest scale count (at most 5) with min(H, W) >= 11 * 2^(scales - 1);
// 0 when the image is smaller than one window.
int ms_ssim_max_scales(int64_t height, int64_t width);

// Multi-scale SSIM per batch row, [N, 1, 1, 1], for data in [0, 1]. The
// first `scales` weights are used, renormalized to sum to 1. Each channel
// gets its own product over scales; channels are then averaged. Odd
// extents drop their last row or column before each 2x downsampling.
template <typename T>
Tensor<T> ms_ssim(const Tensor<T>& x, const Tensor<T>& x_hat, int scales);

// 10 log10(1 / mse), capped at 100 dB once mse < 1e-10.
double psnr_from_mse(double mse);
// -10 log10(1 - msssim) with msssim capped at 1 - 1e-10.
double msssim_to_db(double msssim);

}  // namespace cwic

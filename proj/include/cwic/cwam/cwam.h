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
#include <string>

#include "cwic/tensor/params.h"
#include "cwic/tensor/tensor.h"

namespace cwic {

// Non-overlapping w x w windows of a fine-scale map.
// tokens: [num_windows, 1, w*w, C]; windows are ordered (n, row, col) and
// tokens row-major inside a window.
template <typename T>
struct WindowGrid {
  Tensor<T> tokens;
  int64_t batch = 0;
  int64_t channels = 0;
  int64_t grid_h = 0;
  int64_t grid_w = 0;
  int64_t window = 0;

  int64_t num_windows() const { return batch * grid_h * grid_w; }
};

// One b x b block of the half-resolution map per fine window.
// tokens: [num_windows, 1, b*b, C].
template <typename T>
struct CoarseBlocks {
  Tensor<T> tokens;
  int64_t block = 0;
  int64_t grid_h = 0;
  int64_t grid_w = 0;
};

// Bias-free linear projections of the attention plus its geometry.
template <typename T>
struct CwamParams {
  Tensor<T> query;   // [1, 1, C, C]
  Tensor<T> key;     // [1, 1, C, C]
  Tensor<T> value;   // [1, 1, C, C]
  Tensor<T> output;  // [1, 1, C, C]
  int heads = 4;
  int window = 4;

  static CwamParams create(int64_t channels, int heads, int window, Rng& rng);
  int64_t channels() const { return query.dim(2); }
  void visit(const std::string& prefix, const ParamVisitor<T>& visitor);
};

template <typename T>
struct AttentionResult {
  WindowGrid<T> out;
  Tensor<T> weights;  // [num_windows, heads, w*w, b*b], rows sum to 1
};

// 2x2 average pooling; H and W must be even.
template <typename T>
Tensor<T> downscale_half(const Tensor<T>& f);

// H and W must be multiples of w.
template <typename T>
WindowGrid<T> partition_windows(const Tensor<T>& f, int64_t window);

// Exact inverse of partition_windows.
template <typename T>
Tensor<T> merge_windows(const WindowGrid<T>& grid);

// Reflection-pads the half-scale map by w/2 and cuts one w x w block per
// fine window with stride w/2, offset so each block is centred on its
// window. Each block spans a 2w x 2w region of the fine map.
template <typename T>
CoarseBlocks<T> extract_coarse_blocks(const Tensor<T>& f_half, int64_t window);

// softmax(Q K^T / sqrt(d)) V per head, Q from the fine window and K, V
// from its coarse block; heads are concatenated and projected.
template <typename T>
AttentionResult<T> cross_attention(const WindowGrid<T>& fine, const CoarseBlocks<T>& coarse,
                                   const CwamParams<T>& params);

// F + attention(F). Any H, W >= 1 is accepted: the map is mirror-padded to
// window multiples internally and cropped back.
template <typename T>
Tensor<T> cwam_forward(const Tensor<T>& f, const CwamParams<T>& params);

}  // namespace cwic

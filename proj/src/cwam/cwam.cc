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

#include "cwic/cwam/cwam.h"

#include <algorithm>
#include <cmath>

#include "cwic/errors.h"
#include "cwic/tensor/ops.h"

namespace cwic {

template <typename T>
CwamParams<T> CwamParams<T>::create(int64_t channels, int heads, int window, Rng& rng) {
  if (heads <= 0 || channels % heads != 0) {
    throw ConfigError("cwam: channels (" + std::to_string(channels) + ") not divisible by heads (" +
                      std::to_string(heads) + ")");
  }
  if (window < 2 || window % 2 != 0) throw ConfigError("cwam: window must be even and >= 2");
  const double bound = 1.0 / std::sqrt(static_cast<double>(channels));
  const Shape s{1, 1, channels, channels};
  CwamParams p;
  p.query = uniform_parameter<T>(s, bound, rng);
  p.key = uniform_parameter<T>(s, bound, rng);
  p.value = uniform_parameter<T>(s, bound, rng);
  p.output = uniform_parameter<T>(s, bound, rng);
  p.heads = heads;
  p.window = window;
  return p;
}

template <typename T>
void CwamParams<T>::visit(const std::string& prefix, const ParamVisitor<T>& visitor) {
  visitor(join_name(prefix, "query"), query);
  visitor(join_name(prefix, "key"), key);
  visitor(join_name(prefix, "value"), value);
  visitor(join_name(prefix, "output"), output);
}

template <typename T>
Tensor<T> downscale_half(const Tensor<T>& f) {
  return avg_pool2d(f);
}

template <typename T>
WindowGrid<T> partition_windows(const Tensor<T>& f, int64_t window) {
  const Shape& s = f.shape();
  if (window <= 0 || s.h() % window != 0 || s.w() % window != 0) {
    throw ContractError("partition_windows: " + s.str() + " is not divisible into " +
                        std::to_string(window) + "x" + std::to_string(window) + " windows");
  }
  WindowGrid<T> grid;
  grid.batch = s.n();
  grid.channels = s.c();
  grid.grid_h = s.h() / window;
  grid.grid_w = s.w() / window;
  grid.window = window;
  const int64_t tokens = window * window;
  const Shape out{grid.num_windows(), 1, tokens, s.c()};
  std::vector<int64_t> idx(static_cast<size_t>(out.numel()));
  size_t o = 0;
  for (int64_t n = 0; n < s.n(); ++n)
    for (int64_t gh = 0; gh < grid.grid_h; ++gh)
      for (int64_t gw = 0; gw < grid.grid_w; ++gw)
        for (int64_t r = 0; r < window; ++r)
          for (int64_t c = 0; c < window; ++c)
            for (int64_t ch = 0; ch < s.c(); ++ch) {
              idx[o++] = ((n * s.c() + ch) * s.h() + gh * window + r) * s.w() + gw * window + c;
            }
  grid.tokens = gather(f, out, std::move(idx));
  return grid;
}

template <typename T>
Tensor<T> merge_windows(const WindowGrid<T>& grid) {
  const int64_t w = grid.window;
  const int64_t h_total = grid.grid_h * w, w_total = grid.grid_w * w;
  const int64_t c_total = grid.channels;
  const Shape& ts = grid.tokens.shape();
  if (ts != Shape{grid.num_windows(), 1, w * w, c_total}) {
    throw DimensionError("merge_windows: token tensor " + ts.str() + " does not match its grid");
  }
  const Shape out{grid.batch, c_total, h_total, w_total};
  std::vector<int64_t> idx(static_cast<size_t>(out.numel()));
  size_t o = 0;
  for (int64_t n = 0; n < grid.batch; ++n)
    for (int64_t ch = 0; ch < c_total; ++ch)
      for (int64_t h = 0; h < h_total; ++h)
        for (int64_t x = 0; x < w_total; ++x) {
          const int64_t b = (n * grid.grid_h + h / w) * grid.grid_w + x / w;
          const int64_t t = (h % w) * w + x % w;
          idx[o++] = (b * w * w + t) * c_total + ch;
        }
  return gather(grid.tokens, out, std::move(idx));
}

template <typename T>
CoarseBlocks<T> extract_coarse_blocks(const Tensor<T>& f_half, int64_t window) {
  const Shape& s = f_half.shape();
  if (window < 2 || window % 2 != 0) throw ContractError("extract_coarse_blocks: window must be even");
  const int64_t half_w = window / 2;
  if (s.h() % half_w != 0 || s.w() % half_w != 0) {
    throw ContractError("extract_coarse_blocks: half-scale map " + s.str() +
                        " does not tile into fine windows of " + std::to_string(window));
  }
  const int64_t pad = window / 2;
  if (pad >= s.h() || pad >= s.w()) {
    throw PaddingError("extract_coarse_blocks: reflection pad " + std::to_string(pad) +
                       " needs a larger half-scale map than " + s.str());
  }
  // Block (gh, gw) starts at gh * w/2 + w/4 in padded coordinates, which
  // puts its centre on the centre of fine window (gh, gw).
  const int64_t offset = window / 4;
  CoarseBlocks<T> blocks;
  blocks.block = window;
  blocks.grid_h = s.h() / half_w;
  blocks.grid_w = s.w() / half_w;
  const int64_t tokens = window * window;
  const Shape out{s.n() * blocks.grid_h * blocks.grid_w, 1, tokens, s.c()};
  std::vector<int64_t> idx(static_cast<size_t>(out.numel()));
  size_t o = 0;
  for (int64_t n = 0; n < s.n(); ++n)
    for (int64_t gh = 0; gh < blocks.grid_h; ++gh)
      for (int64_t gw = 0; gw < blocks.grid_w; ++gw)
        for (int64_t r = 0; r < window; ++r)
          for (int64_t c = 0; c < window; ++c) {
            const int64_t row = mirror_index(gh * half_w + offset + r - pad, s.h());
            const int64_t col = mirror_index(gw * half_w + offset + c - pad, s.w());
            for (int64_t ch = 0; ch < s.c(); ++ch) {
              idx[o++] = ((n * s.c() + ch) * s.h() + row) * s.w() + col;
            }
          }
  blocks.tokens = gather(f_half, out, std::move(idx));
  return blocks;
}

namespace {

// [B, 1, T, C] -> [B, heads, T, C / heads]
template <typename T>
Tensor<T> split_heads(const Tensor<T>& x, int heads) {
  const Shape& s = x.shape();
  const Tensor<T> r = reshape(x, Shape{s.n(), s.h(), heads, s.w() / heads});
  return transpose(r, 1, 2);
}

// [B, heads, T, d] -> [B, 1, T, heads * d]
template <typename T>
Tensor<T> merge_heads(const Tensor<T>& x) {
  const Shape& s = x.shape();
  return reshape(transpose(x, 1, 2), Shape{s.n(), 1, s.h(), s.c() * s.w()});
}

}  // namespace

template <typename T>
AttentionResult<T> cross_attention(const WindowGrid<T>& fine, const CoarseBlocks<T>& coarse,
                                   const CwamParams<T>& params) {
  const int64_t channels = fine.channels;
  if (params.heads <= 0 || channels % params.heads != 0) {
    throw ConfigError("cross_attention: channels not divisible by heads");
  }
  if (params.channels() != channels) throw DimensionError("cross_attention: projection width mismatch");
  if (coarse.tokens.dim(0) != fine.tokens.dim(0) || coarse.tokens.dim(3) != channels) {
    throw DimensionError("cross_attention: coarse blocks " + coarse.tokens.shape().str() +
                         " do not pair with windows " + fine.tokens.shape().str());
  }
  const int heads = params.heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(channels / heads)));
  const Tensor<T> q = split_heads(matmul(fine.tokens, params.query), heads);
  const Tensor<T> k = split_heads(matmul(coarse.tokens, params.key), heads);
  const Tensor<T> v = split_heads(matmul(coarse.tokens, params.value), heads);
  const Tensor<T> scores = mul_scalar(matmul(q, transpose(k, 2, 3)), scale);
  AttentionResult<T> result;
  result.weights = softmax(scores, 3);
  result.out = fine;
  result.out.tokens = matmul(merge_heads(matmul(result.weights, v)), params.output);
  return result;
}

template <typename T>
Tensor<T> cwam_forward(const Tensor<T>& f, const CwamParams<T>& params) {
  const int64_t w = params.window;
  if (w < 2 || w % 2 != 0) throw ConfigError("cwam: window must be even and >= 2");
  const Shape& s = f.shape();
  auto padded_extent = [w](int64_t n) { return std::max((n + w - 1) / w * w, 2 * w); };
  const int64_t hp = padded_extent(s.h());
  const int64_t wp = padded_extent(s.w());
  const Tensor<T> fp = mirror_pad2d(f, hp - s.h(), wp - s.w());
  const WindowGrid<T> fine = partition_windows(fp, w);
  const CoarseBlocks<T> coarse = extract_coarse_blocks(downscale_half(fp), w);
  const Tensor<T> attended = merge_windows(cross_attention(fine, coarse, params).out);
  return add(f, crop2d(attended, 0, 0, s.h(), s.w()));
}

#define CWIC_INSTANTIATE_CWAM(T)                                                               \
  template struct CwamParams<T>;                                                               \
  template Tensor<T> downscale_half(const Tensor<T>&);                                         \
  template WindowGrid<T> partition_windows(const Tensor<T>&, int64_t);                         \
  template Tensor<T> merge_windows(const WindowGrid<T>&);                                      \
  template CoarseBlocks<T> extract_coarse_blocks(const Tensor<T>&, int64_t);                   \
  template AttentionResult<T> cross_attention(const WindowGrid<T>&, const CoarseBlocks<T>&,    \
                                              const CwamParams<T>&);                           \
  template Tensor<T> cwam_forward(const Tensor<T>&, const CwamParams<T>&);

CWIC_INSTANTIATE_CWAM(float)
CWIC_INSTANTIATE_CWAM(double)

}  // namespace cwic

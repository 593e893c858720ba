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

#include "cwic/train/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "cwic/errors.h"
#include "cwic/tensor/ops.h"

namespace cwic {

template <typename T>
Tensor<T> mse_per_row(const Tensor<T>& x, const Tensor<T>& x_hat) {
  if (x.shape() != x_hat.shape()) {
    throw DimensionError("mse: " + x.shape().str() + " vs " + x_hat.shape().str());
  }
  return mean(square(sub(x, x_hat)), kAxisC | kAxisH | kAxisW);
}

int ms_ssim_max_scales(int64_t height, int64_t width) {
  const int64_t m = std::min(height, width);
  int s = 0;
  while (s < static_cast<int>(kMsSsimWeights.size()) && m >= kSsimWindow * (int64_t{1} << s)) ++s;
  return s;
}

namespace {

template <typename T>
std::vector<T> gaussian_taps() {
  std::vector<double> g(kSsimWindow);
  const int r = kSsimWindow / 2;
  for (int i = 0; i < kSsimWindow; ++i) g[static_cast<size_t>(i)] = std::exp(-0.5 * (i - r) * (i - r) / (kSsimSigma * kSsimSigma));
  const double total = std::accumulate(g.begin(), g.end(), 0.0);
  std::vector<T> out;
  for (double v : g) out.push_back(static_cast<T>(v / total));
  return out;
}

// Separable valid Gaussian filter on [N * C, 1, H, W] planes.
template <typename T>
Tensor<T> blur(const Tensor<T>& x) {
  static const std::vector<T> taps = gaussian_taps<T>();
  const Tensor<T> row(Shape{1, 1, 1, kSsimWindow}, taps);
  const Tensor<T> col(Shape{1, 1, kSsimWindow, 1}, taps);
  return conv2d(conv2d(x, row, Tensor<T>(), 1, 0), col, Tensor<T>(), 1, 0);
}

template <typename T>
Tensor<T> even_crop(const Tensor<T>& x) {
  const int64_t h = x.dim(2) / 2 * 2, w = x.dim(3) / 2 * 2;
  if (h == x.dim(2) && w == x.dim(3)) return x;
  return crop2d(x, 0, 0, h, w);
}

}  // namespace

template <typename T>
Tensor<T> ms_ssim(const Tensor<T>& x, const Tensor<T>& x_hat, int scales) {
  if (x.shape() != x_hat.shape()) {
    throw DimensionError("ms_ssim: " + x.shape().str() + " vs " + x_hat.shape().str());
  }
  const Shape& s = x.shape();
  if (scales < 1 || scales > ms_ssim_max_scales(s.h(), s.w())) {
    throw ContractError("ms_ssim: " + std::to_string(scales) + " scales need min(H, W) >= " +
                        std::to_string(kSsimWindow * (1 << std::max(scales - 1, 0))) + ", got " + s.str());
  }
  double weight_total = 0.0;
  for (int i = 0; i < scales; ++i) weight_total += kMsSsimWeights[static_cast<size_t>(i)];
  const T c1 = static_cast<T>(kSsimK1 * kSsimK1);
  const T c2 = static_cast<T>(kSsimK2 * kSsimK2);
  const T floor = static_cast<T>(1e-8);

  // Planes: [N * C, 1, H, W].
  Tensor<T> a = reshape(x, Shape{s.n() * s.c(), 1, s.h(), s.w()});
  Tensor<T> b = reshape(x_hat, Shape{s.n() * s.c(), 1, s.h(), s.w()});
  Tensor<T> product;
  for (int level = 0; level < scales; ++level) {
    if (level > 0) {
      a = avg_pool2d(even_crop(a));
      b = avg_pool2d(even_crop(b));
    }
    const Tensor<T> mu_a = blur(a), mu_b = blur(b);
    const Tensor<T> mu_aa = square(mu_a), mu_bb = square(mu_b), mu_ab = mul(mu_a, mu_b);
    const Tensor<T> var_a = sub(blur(square(a)), mu_aa);
    const Tensor<T> var_b = sub(blur(square(b)), mu_bb);
    const Tensor<T> cov = sub(blur(mul(a, b)), mu_ab);
    const Tensor<T> cs_map = div(add_scalar(mul_scalar(cov, T(2)), c2), add_scalar(add(var_a, var_b), c2));
    Tensor<T> term_map = cs_map;
    if (level == scales - 1) {
      const Tensor<T> lum = div(add_scalar(mul_scalar(mu_ab, T(2)), c1), add_scalar(add(mu_aa, mu_bb), c1));
      term_map = mul(lum, cs_map);
    }
    const Tensor<T> term = clamp_min(mean(term_map, kAxisH | kAxisW), floor);
    const T weight = static_cast<T>(kMsSsimWeights[static_cast<size_t>(level)] / weight_total);
    const Tensor<T> factor = pow(term, weight);
    product = level == 0 ? factor : mul(product, factor);
  }
  // [N * C, 1, 1, 1] -> per-row channel mean.
  return mean(reshape(product, Shape{s.n(), s.c(), 1, 1}), kAxisC);
}

double psnr_from_mse(double mse) {
  if (mse < 0) throw ContractError("psnr: negative mse");
  if (mse < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double msssim_to_db(double msssim) {
  return -10.0 * std::log10(std::max(1.0 - msssim, 1e-10));
}

template Tensor<float> mse_per_row(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> mse_per_row(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> ms_ssim(const Tensor<float>&, const Tensor<float>&, int);
template Tensor<double> ms_ssim(const Tensor<double>&, const Tensor<double>&, int);

}  // namespace cwic

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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "cwic/errors.h"
#include "cwic/tensor/gradcheck.h"
#include "cwic/tensor/ops.h"
#include "cwic/train/metrics.h"
#include "test_util.h"

namespace cwic {
namespace {

using testing::random_tensor;
using TD = Tensor<double>;

TEST(PsnrTest, Arithmetic) {
  EXPECT_EQ(psnr_from_mse(0.0), 100.0);
  EXPECT_EQ(psnr_from_mse(1e-11), 100.0);
  EXPECT_NEAR(psnr_from_mse(0.01), 20.0, 1e-9);
  EXPECT_NEAR(psnr_from_mse(0.001), 30.0, 1e-9);
  EXPECT_NEAR(psnr_from_mse(0.5), 10.0 * std::log10(2.0), 1e-9);
}

TEST(PsnrTest, IdenticalImagesHitTheCap) {
  Rng rng(1);
  const TD x = random_tensor(Shape{1, 3, 8, 8}, rng, 0, 1);
  EXPECT_EQ(psnr_from_mse(mse_per_row(x, x).item()), 100.0);
}

TEST(PsnrTest, InvariantToJointPermutation) {
  Rng rng(2);
  const TD x = random_tensor(Shape{1, 3, 6, 6}, rng, 0, 1);
  const TD y = random_tensor(Shape{1, 3, 6, 6}, rng, 0, 1);
  std::vector<int64_t> perm(static_cast<size_t>(x.numel()));
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int64_t>(i);
  for (size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  const TD px = gather(x, x.shape(), perm), py = gather(y, y.shape(), perm);
  EXPECT_NEAR(psnr_from_mse(mse_per_row(x, y).item()), psnr_from_mse(mse_per_row(px, py).item()), 1e-12);
}

TEST(MsSsimDbTest, Conversion) {
  EXPECT_NEAR(msssim_to_db(0.9), 10.0, 1e-9);
  EXPECT_NEAR(msssim_to_db(0.99), 20.0, 1e-9);
  EXPECT_NEAR(msssim_to_db(1.0), 100.0, 1e-9);
}

TEST(MsSsimTest, ScaleCounts) {
  EXPECT_EQ(ms_ssim_max_scales(10, 100), 0);
  EXPECT_EQ(ms_ssim_max_scales(11, 11), 1);
  EXPECT_EQ(ms_ssim_max_scales(64, 64), 3);
  EXPECT_EQ(ms_ssim_max_scales(176, 512), 5);
  EXPECT_EQ(ms_ssim_max_scales(4096, 4096), 5);
}

TEST(MsSsimTest, TooSmallIsContractError) {
  const TD x(Shape{1, 1, 20, 20}, 0.5);
  EXPECT_THROW(ms_ssim(x, x, 2), ContractError);
  EXPECT_THROW(ms_ssim(x, x, 0), ContractError);
}

TEST(MsSsimTest, SelfSimilarityIsOne) {
  Rng rng(3);
  const TD x = random_tensor(Shape{2, 3, 64, 48}, rng, 0, 1);
  const TD s = ms_ssim(x, x, ms_ssim_max_scales(64, 48));
  for (double v : s.data()) EXPECT_NEAR(v, 1.0, 1e-6);
}

TEST(MsSsimTest, InvertedBinaryImageIsNearZero) {
  Rng rng(4);
  std::vector<double> v(3 * 64 * 64);
  for (auto& p : v) p = rng.uniform() < 0.5 ? 0.0 : 1.0;
  std::vector<double> inv;
  for (double p : v) inv.push_back(1.0 - p);
  const double s = ms_ssim(TD(Shape{1, 3, 64, 64}, v), TD(Shape{1, 3, 64, 64}, inv), 3).item();
  EXPECT_LT(s, 1e-3);
  EXPECT_GE(s, 0.0);
}

// Direct single-window SSIM with explicit Gaussian weights.
double ssim_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  double w[11][11], total = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      w[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
      total += w[i][j];
    }
  double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      const double g = w[i][j] / total, x = a[static_cast<size_t>(i * 11 + j)], y = b[static_cast<size_t>(i * 11 + j)];
      ma += g * x;
      mb += g * y;
      saa += g * x * x;
      sbb += g * y * y;
      sab += g * x * y;
    }
  const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
  const double c1 = 0.0001, c2 = 0.0009;
  return (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
}

TEST(MsSsimTest, SingleScaleMatchesScalarOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> a(121), b(121);
    if (trial < 3) {
      // Flat patches: only the luminance term differs from 1.
      std::fill(a.begin(), a.end(), rng.uniform());
      std::fill(b.begin(), b.end(), rng.uniform());
    } else {
      for (auto& v : a) v = rng.uniform();
      for (size_t i = 0; i < b.size(); ++i) b[i] = std::clamp(a[i] + rng.uniform(-0.3, 0.3), 0.0, 1.0);
    }
    const double got = ms_ssim(TD(Shape{1, 1, 11, 11}, a), TD(Shape{1, 1, 11, 11}, b), 1).item();
    EXPECT_NEAR(got, std::max(ssim_oracle(a, b), 1e-8), 1e-6);
  }
}

TEST(MsSsimTest, GradientCheck) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::vector<TD> in = {random_tensor(Shape{1, 2, 22, 22}, rng, 0, 1), random_tensor(Shape{1, 2, 22, 22}, rng, 0, 1)};
    // Correlate the pair so every contrast-structure term stays positive.
    {
      auto b = in[1].mutable_data();
      for (size_t i = 0; i < b.size(); ++i) b[i] = 0.7 * in[0].data()[i] + 0.3 * b[i];
    }
    auto fn = [](const std::vector<TD>& v) { return sum(ms_ssim(v[0], v[1], 2)); };
    const auto r = grad_check(fn, in);
    EXPECT_LT(r.max_rel_error, 1e-4) << "seed " << seed << ": " << r.worst;
    EXPECT_EQ(r.skipped, 0);
  }
}

}  // namespace
}  // namespace cwic

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
#include <numbers>
#include <vector>

#include "cwic/entropy/likelihood.h"
#include "cwic/errors.h"
#include "cwic/tensor/gradcheck.h"
#include "cwic/tensor/ops.h"
#include "test_util.h"

namespace cwic {
namespace {

using testing::random_tensor;
using TD = Tensor<double>;
using Inputs = std::vector<TD>;

// Composite Simpson integration of the N(mu, sigma^2) density.
double integrate_normal(double a, double b, double mu, double sigma) {
  const int n = 20000;
  const double h = (b - a) / n;
  auto f = [&](double x) {
    const double z = (x - mu) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
  };
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

TD scalar_like(double v) { return TD(Shape{1, 1, 1, 1}, v); }

TEST(GaussianLikelihoodTest, StandardNormalAtZero) {
  const double p = gaussian_likelihood(scalar_like(0), scalar_like(0), scalar_like(1)).item();
  EXPECT_NEAR(p, integrate_normal(-0.5, 0.5, 0, 1), 1e-10);
  EXPECT_NEAR(p, 0.382925, 1e-6);
}

TEST(GaussianLikelihoodTest, MatchesIntegrationOracle) {
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const double mu = rng.uniform(-3, 3), sigma = rng.uniform(0.11, 4);
    const double k = std::round(mu + rng.uniform(-3, 3));
    const double p = gaussian_likelihood(scalar_like(k), scalar_like(mu), scalar_like(sigma)).item();
    EXPECT_NEAR(p, integrate_normal(k - 0.5, k + 0.5, mu, sigma), 1e-9);
  }
}

TEST(GaussianLikelihoodTest, SymmetricInSymbol) {
  for (int k = 0; k < 6; ++k) {
    const double a = gaussian_likelihood(scalar_like(k), scalar_like(0), scalar_like(1.7)).item();
    const double b = gaussian_likelihood(scalar_like(-k), scalar_like(0), scalar_like(1.7)).item();
    EXPECT_EQ(a, b);
  }
}

TEST(GaussianLikelihoodTest, SumsToOne) {
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const double mu = i % 2 ? 0.0 : rng.uniform(-2, 2);
    const double sigma = rng.uniform(0.11, 20);
    const int k = static_cast<int>(std::ceil(8 * sigma));
    const int c = static_cast<int>(std::round(mu));
    std::vector<double> symbols;
    for (int s = c - k; s <= c + k; ++s) symbols.push_back(s);
    const int64_t n = static_cast<int64_t>(symbols.size());
    const TD p = gaussian_likelihood(TD(Shape{1, 1, 1, n}, symbols), scalar_like(mu), scalar_like(sigma));
    double total = 0;
    for (double v : p.data()) total += v;
    EXPECT_GE(total, 1 - 1e-6);
    EXPECT_LE(total, 1 + 1e-9);
  }
}

TEST(GaussianLikelihoodTest, FloorInFarTail) {
  const double p = gaussian_likelihood(scalar_like(100), scalar_like(0), scalar_like(0.11)).item();
  EXPECT_EQ(p, kLikelihoodFloor);
}

TEST(GaussianLikelihoodTest, GradientCheck) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Shape s{1, 2, 3, 3};
    Inputs in = {random_tensor(s, rng, -3, 3), random_tensor(s, rng, -3, 3), random_tensor(s, rng, 0.3, 3)};
    auto fn = [seed](const Inputs& v) {
      return testing::weighted_sum(gaussian_likelihood(v[0], v[1], v[2]), seed);
    };
    const auto r = grad_check(fn, in);
    EXPECT_LT(r.max_rel_error, 1e-5) << "seed " << seed << ": " << r.worst;
    EXPECT_EQ(r.skipped, 0);
  }
}

TEST(FactorizedPriorTest, FreshPriorIsBroad) {
  Rng rng(3);
  auto prior = FactorizedPrior<double>::create(4, rng);
  const TD p = factorized_likelihood(TD(Shape{1, 4, 1, 1}, 0.0), prior);
  for (double v : p.data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 0.9);
  }
}

// Perturbs every prior parameter so the checks do not rely on the init.
void scramble(FactorizedPrior<double>& prior, Rng& rng) {
  prior.visit("", [&](const std::string&, TD& t) {
    for (auto& v : t.mutable_data()) v += rng.uniform(-1.5, 1.5);
  });
}

TEST(FactorizedPriorTest, CdfIsMonotone) {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    auto prior = FactorizedPrior<double>::create(3, rng);
    scramble(prior, rng);
    std::vector<double> pts;
    for (double x = -60; x <= 60; x += 0.25) pts.push_back(x);
    const auto cdf = factorized_cdf(prior, pts);
    for (const auto& row : cdf)
      for (size_t i = 1; i < row.size(); ++i) EXPECT_GE(row[i], row[i - 1]);
  }
}

TEST(FactorizedPriorTest, MassOverTabulatedRange) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    auto prior = FactorizedPrior<double>::create(2, rng);
    if (trial > 0) scramble(prior, rng);
    for (int64_t ch = 0; ch < 2; ++ch) {
      // Integer range whose outer half-points hold at most 2^-10 each.
      std::vector<double> pts;
      for (int k = -400; k <= 400; ++k) pts.push_back(k + 0.5);
      const auto row = factorized_cdf(prior, pts)[static_cast<size_t>(ch)];
      int lo = -400, hi = 400;
      while (lo < 400 && row[static_cast<size_t>(lo + 400)] <= 0x1.0p-10) ++lo;
      while (hi > -400 && 1.0 - row[static_cast<size_t>(hi + 399)] <= 0x1.0p-10) --hi;
      std::vector<double> symbols;
      for (int k = lo; k <= hi; ++k) symbols.push_back(k);
      const int64_t n = static_cast<int64_t>(symbols.size());
      std::vector<double> z(static_cast<size_t>(2 * n), 0.0);
      std::copy(symbols.begin(), symbols.end(), z.begin() + ch * n);
      const TD p = factorized_likelihood(TD(Shape{1, 2, 1, n}, z), prior);
      double total = 0;
      for (int64_t i = 0; i < n; ++i) total += p.at(0, ch, 0, i);
      EXPECT_GE(total, 1 - 0x1.0p-9) << "trial " << trial;
      EXPECT_LE(total, 1 + 1e-12);
    }
  }
}

TEST(FactorizedPriorTest, ProbabilitiesPositiveAfterScrambling) {
  Rng rng(6);
  auto prior = FactorizedPrior<double>::create(3, rng);
  scramble(prior, rng);
  const TD z = random_tensor(Shape{2, 3, 4, 4}, rng, -30, 30);
  const TD p = factorized_likelihood(round(z), prior);
  for (double v : p.data()) {
    EXPECT_GE(v, kLikelihoodFloor);
    EXPECT_LE(v, 1.0);
  }
}

TEST(FactorizedPriorTest, LayoutFollowsInput) {
  // Likelihood of element (n, c, h, w) depends only on its own value and
  // channel: compare against single-element evaluations.
  Rng rng(7);
  auto prior = FactorizedPrior<double>::create(3, rng);
  scramble(prior, rng);
  const TD z = round(random_tensor(Shape{2, 3, 2, 3}, rng, -4, 4));
  const TD p = factorized_likelihood(z, prior);
  for (int64_t n = 0; n < 2; ++n)
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t h = 0; h < 2; ++h)
        for (int64_t w = 0; w < 3; ++w) {
          std::vector<double> one(3, 0.0);
          one[static_cast<size_t>(c)] = z.at(n, c, h, w);
          const TD q = factorized_likelihood(TD(Shape{1, 3, 1, 1}, one), prior);
          EXPECT_NEAR(p.at(n, c, h, w), q.at(0, c, 0, 0), 1e-15);
        }
}

TEST(FactorizedPriorTest, GradientCheck) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    auto prior = FactorizedPrior<double>::create(2, rng);
    scramble(prior, rng);
    Inputs in = {random_tensor(Shape{1, 2, 2, 2}, rng, -3, 3)};
    prior.visit("", [&](const std::string&, TD& t) { in.push_back(t); });
    auto fn = [&prior, seed](const Inputs& v) {
      FactorizedPrior<double> q = prior;
      size_t i = 1;
      q.visit("", [&](const std::string&, TD& t) { t = v[i++]; });
      return testing::weighted_sum(log(factorized_likelihood(v[0], q)), seed);
    };
    const auto r = grad_check(fn, in);
    EXPECT_LT(r.max_rel_error, 1e-4) << "seed " << seed << ": " << r.worst;
    EXPECT_EQ(r.skipped, 0);
  }
}

TEST(RateTest, BitsAndBpp) {
  const TD half(Shape{1, 2, 2, 2}, 0.5);
  EXPECT_EQ(rate_bits(half).item(), 8.0);
  EXPECT_EQ(rate_bits<double>(half.data()), 8.0);
  const TD one(Shape{1, 1, 3, 3}, 1.0);
  EXPECT_EQ(rate_bits<double>(one.data()), 0.0);
  EXPECT_EQ(bits_per_pixel(98304, 768, 512), 0.25);
  const std::vector<double> bad = {0.5, 0.0};
  EXPECT_THROW(rate_bits<double>(std::span<const double>(bad)), NumericError);
}

TEST(RateTest, PerRowBits) {
  std::vector<double> v = {0.5, 0.5, 0.25, 0.125};
  const TD r = rate_bits_per_row(TD(Shape{2, 1, 1, 2}, v));
  EXPECT_EQ(r.shape(), (Shape{2, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(r.data()[0], 2.0);
  EXPECT_DOUBLE_EQ(r.data()[1], 5.0);
}

}  // namespace
}  // namespace cwic

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

#include "cwic/codec/model.h"
#include "cwic/errors.h"
#include "cwic/tensor/gradcheck.h"
#include "test_util.h"

namespace cwic {
namespace {

using testing::bit_equal;
using testing::random_tensor;
using testing::weighted_sum;
using TD = Tensor<double>;
using Inputs = std::vector<TD>;

ModelConfig tiny_config(uint64_t seed = 1) {
  ModelConfig c;
  c.n = 8;
  c.m = 8;
  c.heads = 4;
  c.seed = seed;
  return c;
}

void zero_biases(CodecNet<double>& net) {
  net.visit([](const std::string& name, TD& t) {
    if (name.ends_with(".bias") && !name.starts_with("prior"))
      for (auto& v : t.mutable_data()) v = 0.0;
  });
}

TEST(QuantizeTest, RoundExamples) {
  const TD v(Shape{1, 1, 1, 5}, std::vector<double>{0.4, -1.6, 0.5, 1.5, -2.5});
  const TD q = quantize(v, QuantMode::kRound);
  const std::vector<double> want = {0, -2, 0, 2, -2};
  for (size_t i = 0; i < want.size(); ++i) EXPECT_EQ(q.data()[i], want[i]);
}

TEST(QuantizeTest, RoundIsIdempotent) {
  Rng rng(1);
  const TD v = random_tensor(Shape{2, 3, 5, 5}, rng, -20, 20);
  const TD once = quantize(v, QuantMode::kRound);
  EXPECT_TRUE(bit_equal(quantize(once, QuantMode::kRound), once));
}

TEST(QuantizeTest, NoiseStaysWithinHalf) {
  Rng rng(2);
  for (double scale : {1.0, 1e3, 1e7}) {
    const Tensor<float> v = random_tensor<float>(Shape{2, 4, 8, 8}, rng, -scale, scale);
    const Tensor<float> q = quantize(v, QuantMode::kNoise, 7);
    double max_dev = 0;
    for (int64_t i = 0; i < v.numel(); ++i)
      max_dev = std::max(max_dev, std::abs(static_cast<double>(q.data()[i]) - v.data()[i]));
    EXPECT_LE(max_dev, 0.5);
  }
}

TEST(QuantizeTest, NoiseIsSeededPerRow) {
  Rng rng(3);
  const TD row = random_tensor(Shape{1, 2, 3, 3}, rng);
  const TD v = concat(std::vector<TD>{row, row, random_tensor(Shape{1, 2, 3, 3}, rng)}, 0);
  const TD a = quantize(v, QuantMode::kNoise, 11);
  EXPECT_TRUE(bit_equal(a, quantize(v, QuantMode::kNoise, 11)));
  EXPECT_TRUE(bit_equal(slice(a, 0, 0, 1), slice(a, 0, 1, 1)));
  EXPECT_FALSE(bit_equal(a, quantize(v, QuantMode::kNoise, 12)));
  const std::vector<uint64_t> bad = {1};
  EXPECT_THROW(quantize(v, QuantMode::kNoise, 0, bad), ContractError);
}

TEST(QuantizeTest, SteGradientIsOnes) {
  Rng rng(4);
  TD v = random_tensor(Shape{1, 2, 4, 4}, rng, -3, 3);
  v.set_requires_grad(true);
  backward(sum(quantize(v, QuantMode::kSte)));
  for (double g : v.grad()) EXPECT_EQ(g, 1.0);
}

TEST(ModelConfigTest, Validation) {
  ModelConfig c;
  EXPECT_NO_THROW(c.validate());
  c.window = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig{};
  c.lambda = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig{};
  c.n = 30;
  EXPECT_THROW(c.validate(), ConfigError);
  c.use_cwam = false;
  EXPECT_NO_THROW(c.validate());
  c = ModelConfig{};
  c.m = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ModelConfigTest, LambdaGrids) {
  for (size_t i = 0; i < kMseLambdas.size(); ++i) {
    ModelConfig c;
    c.lambda = lambda_for_quality(Metric::kMse, static_cast<int>(i) + 1);
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.lambda_index(), static_cast<int>(i) + 1);
  }
  for (size_t i = 0; i < kMsSsimLambdas.size(); ++i) {
    ModelConfig c;
    c.metric = Metric::kMsSsim;
    c.lambda = lambda_for_quality(Metric::kMsSsim, static_cast<int>(i) + 1);
    EXPECT_EQ(c.lambda_index(), static_cast<int>(i) + 1);
  }
  EXPECT_THROW(lambda_for_quality(Metric::kMse, 7), ConfigError);
  EXPECT_THROW(lambda_for_quality(Metric::kMsSsim, 0), ConfigError);
  EXPECT_EQ(parse_metric("ms-ssim"), Metric::kMsSsim);
  EXPECT_THROW(parse_metric("ssim"), ConfigError);
}

TEST(FeatureCodingTest, ZeroDenseIsProjection) {
  auto net = CodecNet<double>::create(tiny_config());
  net.fe_dense.conv1.zero();
  net.fe_dense.conv2.zero();
  net.fe_dense.conv3.zero();
  Rng rng(5);
  const TD x = random_tensor(Shape{1, 3, 16, 16}, rng, 0, 1);
  EXPECT_TRUE(bit_equal(net.feature_encode(x), apply_conv(x, net.fe_proj)));
  EXPECT_EQ(net.feature_encode(TD(Shape{1, 3, 256, 256}, 0.5)).shape(), (Shape{1, 3, 256, 256}));
}

TEST(FeatureCodingTest, GradientReachesInput) {
  auto net = CodecNet<double>::create(tiny_config());
  Rng rng(6);
  TD x = random_tensor(Shape{1, 3, 8, 8}, rng, 0, 1);
  x.set_requires_grad(true);
  backward(weighted_sum(net.feature_decode(net.feature_encode(x)), 1));
  int nonzero = 0;
  for (double g : x.grad()) nonzero += g != 0.0;
  EXPECT_EQ(nonzero, x.numel());
}

TEST(FeatureCodingTest, DisabledIsIdentity) {
  ModelConfig c = tiny_config();
  c.use_feature_coding = false;
  auto net = CodecNet<double>::create(c);
  Rng rng(7);
  const TD x = random_tensor(Shape{1, 3, 8, 8}, rng, 0, 1);
  EXPECT_TRUE(bit_equal(net.feature_encode(x), x));
  EXPECT_TRUE(bit_equal(net.feature_decode(x), x));
}

TEST(TransformTest, AnalysisShapes) {
  const auto net = CodecNet<float>::create(tiny_config());
  EXPECT_EQ(net.analysis(Tensor<float>(Shape{1, 3, 256, 256}, 0.5f)).shape(), (Shape{1, 8, 16, 16}));
  EXPECT_EQ(net.analysis(Tensor<float>(Shape{1, 3, 64, 64}, 0.5f)).shape(), (Shape{1, 8, 4, 4}));
  EXPECT_THROW(net.analysis(Tensor<float>(Shape{1, 3, 40, 64}, 0.5f)), DimensionError);
}

TEST(TransformTest, SynthesisShapes) {
  const auto net = CodecNet<float>::create(tiny_config());
  EXPECT_EQ(net.synthesis(Tensor<float>(Shape{1, 8, 16, 16}, 1.0f)).shape(), (Shape{1, 3, 256, 256}));
  const auto trace = net.decode_latent(Tensor<float>(Shape{1, 8, 4, 6}, 1.0f));
  EXPECT_EQ(trace.y_refined.shape(), (Shape{1, 8, 4, 6}));
  EXPECT_EQ(trace.x_syn.shape(), (Shape{1, 3, 64, 96}));
  EXPECT_EQ(trace.x_hat.shape(), (Shape{1, 3, 64, 96}));
}

TEST(TransformTest, ZeroInZeroOut) {
  auto net = CodecNet<double>::create(tiny_config());
  zero_biases(net);
  const TD y = net.analysis(TD(Shape{1, 3, 64, 64}, 0.0));
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
  const TD x = net.synthesis(TD(Shape{1, 8, 4, 4}, 0.0));
  for (double v : x.data()) EXPECT_EQ(v, 0.0);
}

TEST(TransformTest, ShapeRoundTrip) {
  const auto net = CodecNet<float>::create(tiny_config());
  for (auto [h, w] : {std::pair<int64_t, int64_t>{64, 64}, {128, 64}, {64, 192}}) {
    const Tensor<float> x(Shape{1, 3, h, w}, 0.25f);
    EXPECT_EQ(net.decode_latent(net.encode_latent(x)).x_hat.shape(), x.shape());
  }
}

TEST(HyperpriorTest, Shapes) {
  const auto net = CodecNet<float>::create(tiny_config());
  Rng rng(8);
  const Tensor<float> y = random_tensor<float>(Shape{1, 8, 16, 16}, rng, -5, 5);
  const Tensor<float> z = net.hyper_analysis(y);
  EXPECT_EQ(z.shape(), (Shape{1, 4, 4, 4}));
  const auto gp = net.hyper_synthesis(round(z));
  EXPECT_EQ(gp.mu.shape(), y.shape());
  EXPECT_EQ(gp.sigma.shape(), y.shape());
}

TEST(HyperpriorTest, SigmaFloor) {
  auto net = CodecNet<double>::create(tiny_config());
  // Push the log-scale half strongly negative.
  auto b = net.hs_conv[2].bias.mutable_data();
  for (size_t i = 8; i < 16; ++i) b[i] = -30.0;
  Rng rng(9);
  const auto gp = net.hyper_synthesis(random_tensor(Shape{1, 4, 2, 2}, rng, -3, 3));
  for (double s : gp.sigma.data()) EXPECT_GE(s, kSigmaMin);
  for (double s : gp.sigma.data()) EXPECT_EQ(s, kSigmaMin);
}

TEST(HyperpriorTest, SmallLatentIsConfigError) {
  const auto net = CodecNet<float>::create(tiny_config());
  EXPECT_THROW(net.hyper_analysis(Tensor<float>(Shape{1, 8, 2, 2}, 0.0f)), ConfigError);
  EXPECT_THROW(net.hyper_analysis(Tensor<float>(Shape{1, 8, 6, 8}, 0.0f)), DimensionError);
}

TEST(HyperpriorTest, GradientCheck) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    ModelConfig c = tiny_config(seed);
    c.n = c.m = 4;
    c.hyper = 2;
    auto net = CodecNet<double>::create(c);
    Rng rng(seed);
    Inputs in = {random_tensor(Shape{1, 4, 4, 4}, rng, -2, 2, 0.0, 0.05)};
    for (auto* conv : {&net.ha_conv[0], &net.ha_conv[1], &net.ha_conv[2], &net.hs_conv[0],
                       &net.hs_conv[1], &net.hs_conv[2]})
      conv->visit("", [&](const std::string&, TD& t) { in.push_back(t); });
    auto fn = [&net, seed](const Inputs& v) {
      CodecNet<double> q = net;
      size_t i = 1;
      for (auto* conv : {&q.ha_conv[0], &q.ha_conv[1], &q.ha_conv[2], &q.hs_conv[0], &q.hs_conv[1],
                         &q.hs_conv[2]})
        conv->visit("", [&](const std::string&, TD& t) { t = v[i++]; });
      const auto gp = q.hyper_synthesis(q.hyper_analysis(v[0]));
      return add(weighted_sum(gp.mu, seed), weighted_sum(gp.sigma, seed + 100));
    };
    const auto r = grad_check(fn, in);
    EXPECT_LT(r.max_rel_error, 1e-4) << "seed " << seed << ": " << r.worst;
    EXPECT_EQ(r.skipped, 0);
  }
}

TEST(ForwardTest, LossIdentityAndDuplicateRows) {
  auto net = CodecNet<float>::create(tiny_config());
  Rng rng(10);
  const Tensor<float> a = random_tensor<float>(Shape{1, 3, 64, 64}, rng, 0, 1);
  const Tensor<float> b = random_tensor<float>(Shape{1, 3, 64, 64}, rng, 0, 1);
  const Tensor<float> x = concat(std::vector<Tensor<float>>{a, b, a}, 0);
  const auto r = net.forward(x, QuantMode::kNoise, 3);
  const LossBreakdown& lb = r.breakdown;
  ASSERT_EQ(lb.row_L.size(), 3u);
  EXPECT_EQ(lb.row_L[0], lb.row_L[2]);
  EXPECT_NE(lb.row_L[0], lb.row_L[1]);
  for (size_t i = 0; i < 3; ++i) EXPECT_EQ(lb.row_L[i], lb.row_R_bpp[i] + lb.lambda * lb.row_D[i]);
  EXPECT_EQ(lb.L, lb.R_bpp + lb.lambda * lb.D);
  EXPECT_NEAR(r.loss.item(), lb.L, 1e-4 * lb.L);
  EXPECT_GT(lb.R_bpp, 0.0);
  for (int64_t i = 0; i < r.latents.y.numel(); ++i)
    EXPECT_LE(std::abs(r.latents.y_hat.data()[i] - r.latents.y.data()[i]), 0.5f);
}

TEST(ForwardTest, RoundModeGivesIntegers) {
  const auto net = CodecNet<float>::create(tiny_config());
  Rng rng(11);
  const auto r = net.forward(random_tensor<float>(Shape{1, 3, 64, 128}, rng, 0, 1), QuantMode::kRound);
  for (float v : r.latents.y_hat.data()) EXPECT_EQ(v, std::nearbyint(v));
  for (float v : r.latents.z_hat.data()) EXPECT_EQ(v, std::nearbyint(v));
  EXPECT_EQ(r.x_hat.shape(), (Shape{1, 3, 64, 128}));
}

TEST(ForwardTest, RejectsUnpaddedInput) {
  const auto net = CodecNet<float>::create(tiny_config());
  EXPECT_THROW(net.forward(Tensor<float>(Shape{1, 3, 64, 80}, 0.5f), QuantMode::kRound), DimensionError);
}

TEST(ForwardTest, MsSsimMetric) {
  ModelConfig c = tiny_config();
  c.metric = Metric::kMsSsim;
  c.lambda = kMsSsimLambdas[0];
  const auto net = CodecNet<float>::create(c);
  Rng rng(12);
  const auto r = net.forward(random_tensor<float>(Shape{1, 3, 64, 64}, rng, 0, 1), QuantMode::kNoise);
  EXPECT_GT(r.breakdown.D, 0.0);
  EXPECT_LE(r.breakdown.D, 1.0);
}

TEST(InferenceTest, DecoderIsDeterministic) {
  const auto net = CodecNet<float>::create(tiny_config());
  Rng rng(13);
  const Tensor<float> x = random_tensor<float>(Shape{1, 3, 64, 64}, rng, 0, 1);
  NoGradGuard no_grad;
  const Tensor<float> y_hat = round(net.encode_latent(x));
  const Tensor<float> z_hat = round(net.hyper_analysis(y_hat));
  EXPECT_TRUE(bit_equal(net.decode_latent(y_hat).x_hat, net.decode_latent(y_hat).x_hat));
  EXPECT_TRUE(bit_equal(net.hyper_synthesis(z_hat).mu, net.hyper_synthesis(z_hat).mu));
  const auto copy = CodecNet<float>::create(tiny_config());
  EXPECT_TRUE(bit_equal(copy.decode_latent(y_hat).x_hat, net.decode_latent(y_hat).x_hat));
}

TEST(InferenceTest, ModelHashTracksParameters) {
  auto a = CodecNet<float>::create(tiny_config(1));
  auto b = CodecNet<float>::create(tiny_config(1));
  auto c = CodecNet<float>::create(tiny_config(2));
  EXPECT_EQ(model_hash(a), model_hash(b));
  EXPECT_NE(model_hash(a), model_hash(c));
  b.ga_conv[0].bias.mutable_data()[0] += 1.0f;
  EXPECT_NE(model_hash(a), model_hash(b));
}

TEST(EndToEndTest, GradientCheck) {
  // Smallest image the hyperprior accepts; two channels per head.
  for (uint64_t seed = 0; seed < 3; ++seed) {
    ModelConfig c;
    c.n = c.m = 4;
    c.hyper = 2;
    c.heads = 2;
    c.feature_growth = 2;
    c.seed = seed;
    auto net = CodecNet<double>::create(c);
    Rng rng(seed + 50);
    const TD x = random_tensor(Shape{1, 3, 64, 64}, rng, 0, 1);
    const auto keys = row_keys(x);
    Inputs in = {x};
    net.visit([&](const std::string&, TD& t) { in.push_back(t); });
    auto fn = [&net, &keys](const Inputs& v) {
      CodecNet<double> q = net;
      size_t i = 1;
      q.visit([&](const std::string&, TD& t) { t = v[i++]; });
      return q.forward(v[0], QuantMode::kNoise, 9, keys).loss;
    };
    // The loss sits near 1.7e3 while the gradient spans 1e-10..2e3; a wider
    // step and a floor tied to the largest entry keep round-off out.
    GradCheckOptions opt;
    opt.step = 1e-3;
    opt.relative_floor = 1e-6;
    opt.max_per_input = 8;
    opt.sample_seed = seed;
    const auto r = grad_check(fn, in, opt);
    EXPECT_LT(r.max_rel_error, 1e-3) << "seed " << seed << ": " << r.worst;
    EXPECT_EQ(r.skipped, 0);
  }
}

}  // namespace
}  // namespace cwic

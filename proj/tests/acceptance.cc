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

// Acceptance harness: one PASS/FAIL line per criterion, exit 0 when all
// pass. `acceptance 3 6` runs a subset.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cwic/codec/image_codec.h"
#include "cwic/cwam/cwam.h"
#include "cwic/entropy/cdf.h"
#include "cwic/entropy/likelihood.h"
#include "cwic/errors.h"
#include "cwic/nn/layers.h"
#include "cwic/tensor/gradcheck.h"
#include "cwic/train/checkpoint.h"
#include "cwic/train/evaluate.h"
#include "cwic/train/image_io.h"
#include "cwic/train/metrics.h"
#include "cwic/train/trainer.h"
#include "oracles.h"
#include "test_util.h"

namespace cwic {
namespace {

namespace fs = std::filesystem;
using TD = Tensor<double>;
using Inputs = std::vector<TD>;
using testing::random_tensor;
using testing::weighted_sum;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

// ---- shared desk training ------------------------------------------------

constexpr int64_t kDeskSteps = 300;
// The RD grid needs a model that generalizes: more varied images, a longer
// run and a larger step than the default.
constexpr int64_t kRdSteps = 1500;
constexpr double kRdLr = 1e-3;

std::vector<ImageTensor> desk_images() {
  std::vector<ImageTensor> v;
  for (uint64_t i = 0; i < 16; ++i) v.push_back(quantize_8bit(synthetic_image(64, 64, 100 + i)));
  return v;
}

// 128 x 128 images, cropped to 64 x 64 in training.
std::vector<ImageTensor> varied_images() {
  std::vector<ImageTensor> v;
  for (uint64_t i = 0; i < 64; ++i) v.push_back(quantize_8bit(synthetic_image(128, 128, 100 + i)));
  return v;
}

// Images never seen in training.
std::vector<ImageTensor> heldout_images() {
  std::vector<ImageTensor> v;
  for (uint64_t i = 0; i < 8; ++i) v.push_back(quantize_8bit(synthetic_image(64, 64, 900 + i)));
  return v;
}

struct DeskRun {
  double lambda = 0.0483;
  uint64_t seed = 1;
  bool full = true;
  int64_t steps = kDeskSteps;
  double lr = 1e-4;
  bool varied = false;
  auto operator<=>(const DeskRun&) const = default;
};

const TrainResult& desk_train(const DeskRun& run) {
  static std::map<DeskRun, TrainResult> cache;
  if (auto it = cache.find(run); it != cache.end()) return it->second;
  TrainOptions o;
  o.model.n = 32;
  o.model.m = 32;
  o.model.lambda = run.lambda;
  o.model.seed = run.seed;
  o.model.use_cwam = run.full;
  o.model.use_feature_coding = run.full;
  o.steps = run.steps;
  o.crop = 64;
  o.seed = run.seed;
  o.lr = run.lr;
  static const auto desk = desk_images();
  static const auto varied = varied_images();
  return cache.emplace(run, train(run.varied ? varied : desk, o)).first->second;
}

// Mean rounded-quantization RD loss on the held-out images.
double heldout_loss(const CodecNet<float>& net) {
  static const auto images = heldout_images();
  NoGradGuard guard;
  double total = 0;
  for (const auto& x : images) total += net.forward(x, QuantMode::kRound).breakdown.L;
  return total / static_cast<double>(images.size());
}

// ---- 1 ---------------------------------------------------------------------

Verdict entropy_transport() {
  Rng rng(2024);
  std::vector<CdfTable> tables;
  std::vector<int32_t> values;
  int escapes = 0;
  for (int i = 0; i < 1000; ++i) {
    const double mu = rng.uniform(-50, 50);
    const double sigma = kSigmaMin * std::exp(rng.uniform(0, std::log(200.0 / kSigmaMin)));
    tables.push_back(gaussian_table(mu, sigma));
    int32_t v;
    switch (i % 10) {
      case 0:  // anywhere in int32, mostly escapes
        v = static_cast<int32_t>(static_cast<uint32_t>(rng.below(1u << 31)) * 2u + static_cast<uint32_t>(rng.below(2)));
        break;
      case 1:  // table edges
        v = rng.below(2) ? tables.back().offset : tables.back().max_symbol();
        break;
      default:
        v = static_cast<int32_t>(std::lround(mu + sigma * rng.normal()));
    }
    if (v < tables.back().offset || v > tables.back().max_symbol()) ++escapes;
    values.push_back(v);
  }
  const auto bytes = rc_encode(values, tables);
  const auto back = rc_decode(bytes, tables);
  size_t bad = 0;
  for (size_t i = 0; i < values.size(); ++i) bad += back.size() > i && back[i] == values[i] ? 0 : 1;
  // Case-by-case streams too, so a failure cannot hide behind stream state.
  size_t bad_single = 0;
  for (size_t i = 0; i < values.size(); ++i) {
    const std::span<const int32_t> v(&values[i], 1);
    const std::span<const CdfTable> t(&tables[i], 1);
    if (rc_decode(rc_encode(v, t), t) != std::vector<int32_t>{values[i]}) ++bad_single;
  }
  return {bad == 0 && bad_single == 0 && back.size() == values.size(),
          std::to_string(values.size()) + " cases, " + std::to_string(escapes) + " escapes, mismatches " +
              std::to_string(bad) + " joint / " + std::to_string(bad_single) + " single"};
}

// ---- 2 ---------------------------------------------------------------------

Verdict rate_fidelity() {
  double worst = -1e300, total_coded = 0, total_ideal = 0;
  std::string worst_case;
  for (uint64_t t = 0; t < 50; ++t) {
    Rng rng(7000 + t);
    const int64_t c = 4 + static_cast<int64_t>(rng.below(29)), h = 1 + static_cast<int64_t>(rng.below(16)),
                  w = 1 + static_cast<int64_t>(rng.below(16));
    const Shape s{1, c, h, w};
    std::vector<double> mu(static_cast<size_t>(s.numel())), sigma(mu.size()), y(mu.size());
    const double log_hi = rng.uniform(std::log(0.5), std::log(64.0));
    for (size_t i = 0; i < mu.size(); ++i) {
      mu[i] = rng.uniform(-20, 20);
      sigma[i] = std::exp(rng.uniform(std::log(kSigmaMin), log_hi));
      y[i] = std::nearbyint(mu[i] + sigma[i] * rng.normal());
    }
    GaussianParams<double> gp{TD(s, mu), TD(s, sigma)};
    const double ideal = sum(rate_bits(gaussian_likelihood(TD(s, y), gp.mu, gp.sigma))).item();
    const auto tables = gaussian_tables(gp);
    std::vector<int32_t> values(y.begin(), y.end());
    const double coded = 8.0 * static_cast<double>(rc_encode(values, tables).size());
    const double bound = 1.05 * ideal + 64 * 8;
    total_coded += coded;
    total_ideal += ideal;
    if (rc_decode(rc_encode(values, tables), tables) != values) return {false, "trial " + std::to_string(t) + " did not round trip"};
    if (coded - bound > worst) {
      worst = coded - bound;
      worst_case = "trial " + std::to_string(t) + ": coded " + fmt("%.0f", coded) + " bits vs ideal " + fmt("%.1f", ideal);
    }
  }
  return {worst <= 0, fmt("50 tensors, coded / ideal overall %.4f, tightest ", total_coded / total_ideal) + worst_case +
                          fmt(" (margin %.1f bits)", -worst)};
}

// ---- 3 ---------------------------------------------------------------------

struct LayerCheck {
  const char* name;
  double tol;
  std::function<std::pair<std::function<TD(const Inputs&)>, Inputs>(uint64_t seed)> make;
};

template <typename P>
std::pair<std::function<TD(const Inputs&)>, Inputs> params_check(TD x, P p, uint64_t seed,
                                                                 std::function<TD(const TD&, const P&)> layer) {
  Inputs in = {std::move(x)};
  p.visit("", [&](const std::string&, TD& t) { in.push_back(t); });
  auto fn = [p, seed, layer](const Inputs& v) {
    P q = p;
    size_t i = 1;
    q.visit("", [&](const std::string&, TD& t) { t = v[i++]; });
    return weighted_sum(layer(v[0], q), seed + 31);
  };
  return {fn, in};
}

std::vector<LayerCheck> layer_checks() {
  return {
      {"conv", 1e-5,
       [](uint64_t seed) {
         Rng rng(seed);
         const int stride = 1 + static_cast<int>(seed % 2);
         Inputs in = {random_tensor(Shape{1, 2, 7, 6}, rng), random_tensor(Shape{3, 2, 3, 3}, rng),
                      random_tensor(Shape{1, 3, 1, 1}, rng)};
         auto fn = [seed, stride](const Inputs& v) { return weighted_sum(conv2d(v[0], v[1], v[2], stride, 1), seed); };
         return std::pair<std::function<TD(const Inputs&)>, Inputs>{fn, in};
       }},
      {"conv_transpose", 1e-5,
       [](uint64_t seed) {
         Rng rng(seed);
         Inputs in = {random_tensor(Shape{1, 2, 4, 3}, rng), random_tensor(Shape{2, 3, 5, 5}, rng),
                      random_tensor(Shape{1, 3, 1, 1}, rng)};
         auto fn = [seed](const Inputs& v) {
           return weighted_sum(conv2d_transpose(v[0], v[1], v[2], 2, 2, 1), seed);
         };
         return std::pair<std::function<TD(const Inputs&)>, Inputs>{fn, in};
       }},
      {"gdn", 1e-4,
       [](uint64_t seed) {
         Rng rng(seed);
         auto p = GdnParams<double>::create(3, seed % 2 == 1);
         p.beta_raw = random_tensor(Shape{1, 3, 1, 1}, rng, 0.5, 1.5);
         p.gamma_raw = random_tensor(Shape{3, 3, 1, 1}, rng, 0.1, 0.8);
         return params_check<GdnParams<double>>(random_tensor(Shape{1, 3, 4, 4}, rng, -2, 2), p, seed,
                                                [](const TD& x, const GdnParams<double>& q) { return gdn(x, q); });
       }},
      {"dense", 1e-4,
       [](uint64_t seed) {
         Rng rng(seed);
         auto p = DenseBlockParams<double>::create(3, 2, rng);
         return params_check<DenseBlockParams<double>>(
             random_tensor(Shape{1, 3, 5, 4}, rng), p, seed,
             [](const TD& x, const DenseBlockParams<double>& q) { return dense_block(x, q); });
       }},
      {"residual", 1e-4,
       [](uint64_t seed) {
         Rng rng(seed);
         auto p = ResidualBlockParams<double>::create(4, seed % 2 == 1, 2, 4, rng);
         return params_check<ResidualBlockParams<double>>(
             random_tensor(Shape{1, 4, 8, 8}, rng), p, seed,
             [](const TD& x, const ResidualBlockParams<double>& q) { return residual_block(x, q); });
       }},
      {"cwam", 1e-4,
       [](uint64_t seed) {
         Rng rng(seed);
         auto p = CwamParams<double>::create(4, 2, 4, rng);
         const Shape s = seed % 2 ? Shape{1, 4, 8, 8} : Shape{1, 4, 6, 9};
         Inputs in = {random_tensor(s, rng), p.query, p.key, p.value, p.output};
         auto fn = [seed](const Inputs& v) {
           CwamParams<double> q;
           q.query = v[1];
           q.key = v[2];
           q.value = v[3];
           q.output = v[4];
           return weighted_sum(cwam_forward(v[0], q), seed);
         };
         return std::pair<std::function<TD(const Inputs&)>, Inputs>{fn, in};
       }},
      {"gaussian_likelihood", 1e-5,
       [](uint64_t seed) {
         Rng rng(seed);
         const Shape s{1, 2, 3, 3};
         Inputs in = {random_tensor(s, rng, -3, 3), random_tensor(s, rng, -3, 3), random_tensor(s, rng, 0.3, 3)};
         auto fn = [seed](const Inputs& v) { return weighted_sum(gaussian_likelihood(v[0], v[1], v[2]), seed); };
         return std::pair<std::function<TD(const Inputs&)>, Inputs>{fn, in};
       }},
      {"ms_ssim", 1e-4,
       [](uint64_t seed) {
         Rng rng(seed);
         Inputs in = {random_tensor(Shape{1, 2, 22, 23}, rng, 0, 1), random_tensor(Shape{1, 2, 22, 23}, rng, 0, 1)};
         auto b = in[1].mutable_data();
         for (size_t i = 0; i < b.size(); ++i) b[i] = 0.7 * in[0].data()[i] + 0.3 * b[i];
         auto fn = [](const Inputs& v) { return sum(ms_ssim(v[0], v[1], 2)); };
         return std::pair<std::function<TD(const Inputs&)>, Inputs>{fn, in};
       }},
  };
}

Verdict gradient_suite() {
  bool ok = true;
  std::string detail;
  for (const auto& check : layer_checks()) {
    double worst = 0;
    int64_t skipped = 0;
    for (uint64_t seed = 0; seed < 20; ++seed) {
      auto [fn, in] = check.make(seed);
      const auto r = grad_check(fn, in);
      worst = std::max(worst, r.max_rel_error);
      skipped += r.skipped;
    }
    const bool pass = worst < check.tol && skipped == 0;
    ok = ok && pass;
    detail += std::string(detail.empty() ? "" : ", ") + check.name + fmt(" %.1e", worst) + (pass ? "" : "!");
  }
  return {ok, "20 seeds each, max rel err: " + detail};
}

// ---- 4 ---------------------------------------------------------------------

// Every output pixel's influence set equals its window's coarse footprint
// plus itself, and interior footprints stay inside the 2w x 2w square.
Verdict cwam_receptive_field() {
  using testing::Pixel;
  const int64_t w = 4, c = 4;
  int64_t outputs = 0, wrong = 0;
  for (auto [h, wi, seed] : std::vector<std::array<int64_t, 3>>{{16, 16, 1}, {12, 20, 2}, {10, 7, 3}, {5, 9, 4}}) {
    Rng rng(static_cast<uint64_t>(seed));
    auto p = CwamParams<double>::create(c, 2, w, rng);
    const TD f = random_tensor(Shape{1, c, h, wi}, rng);
    const TD base = cwam_forward(f, p);
    std::map<Pixel, std::set<Pixel>> influence;
    for (int64_t i = 0; i < h; ++i)
      for (int64_t j = 0; j < wi; ++j) {
        std::vector<double> v(f.data().begin(), f.data().end());
        for (int64_t ch = 0; ch < c; ++ch) v[static_cast<size_t>((ch * h + i) * wi + j)] += 0.25 + 0.1 * ch;
        const TD out = cwam_forward(TD(f.shape(), v), p);
        for (int64_t qi = 0; qi < h; ++qi)
          for (int64_t qj = 0; qj < wi; ++qj)
            for (int64_t ch = 0; ch < c; ++ch)
              if (out.at(0, ch, qi, qj) != base.at(0, ch, qi, qj)) {
                influence[{qi, qj}].insert({i, j});
                break;
              }
      }
    for (int64_t qi = 0; qi < h; ++qi)
      for (int64_t qj = 0; qj < wi; ++qj) {
        auto want = testing::coarse_footprint(h, wi, w, qi / w, qj / w);
        want.insert({qi, qj});
        ++outputs;
        if (influence[{qi, qj}] != want) ++wrong;
      }
  }
  int64_t escaped = 0;
  for (int64_t gh = 1; gh < 7; ++gh)
    for (int64_t gw = 1; gw < 7; ++gw)
      for (const auto& [r, col] : testing::coarse_footprint(32, 32, w, gh, gw))
        if (r < gh * w - w / 2 || r >= gh * w + w + w / 2 || col < gw * w - w / 2 || col >= gw * w + w + w / 2)
          ++escaped;
  return {wrong == 0 && escaped == 0, std::to_string(outputs) + " output pixels probed, " + std::to_string(wrong) +
                                          " influence sets differ, " + std::to_string(escaped) +
                                          " footprint pixels beyond 2w x 2w"};
}

// ---- 5 ---------------------------------------------------------------------

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome run_cli(const std::string& args) {
  const std::string cmd = std::string(CWIC_BIN) + " " + args + " 2>&1";
  Outcome r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf;
  size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::vector<uint8_t> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct TempDir {
  fs::path path = fs::temp_directory_path() / ("cwic_acceptance_" + std::to_string(::getpid()));
  TempDir() { fs::create_directories(path); }
  ~TempDir() { fs::remove_all(path); }
};

Verdict codec_round_trip() {
  TempDir tmp;
  auto net = desk_train({}).net;
  const fs::path model = tmp.path / "desk.ckpt";
  save_checkpoint(model, net, kDeskSteps);
  const std::vector<std::pair<int64_t, int64_t>> sizes = {{1, 1},   {512, 768}, {33, 70},  {64, 64},   {100, 37},
                                                          {2, 3},   {129, 257}, {17, 1},   {256, 256}, {45, 199}};
  int passed = 0;
  std::string failures;
  for (size_t i = 0; i < sizes.size(); ++i) {
    const auto [h, w] = sizes[i];
    const auto x = quantize_8bit(synthetic_image(h, w, 500 + i));
    const fs::path in = tmp.path / ("img" + std::to_string(i) + ".png"), bin = tmp.path / ("img" + std::to_string(i) + ".cwic"),
                   recon = tmp.path / ("recon" + std::to_string(i) + ".png"),
                   dec = tmp.path / ("dec" + std::to_string(i) + ".png");
    save_image(in, x);
    const auto enc = run_cli("encode --model " + model.string() + " --input " + in.string() + " --output " +
                             bin.string() + " --verify --recon " + recon.string());
    const auto d = run_cli("decode --model " + model.string() + " --input " + bin.string() + " --output " + dec.string());
    std::string why;
    if (enc.code != 0 || d.code != 0) {
      why = "exit codes " + std::to_string(enc.code) + "/" + std::to_string(d.code);
    } else {
      const auto bytes = slurp(bin);
      const double bits = 8.0 * static_cast<double>(bytes.size());
      const double pixels = static_cast<double>(h * w);
      char want[64];
      std::snprintf(want, sizeof(want), "bpp=%.6f ", bits / pixels);
      const auto a = load_image(dec), b = load_image(recon);
      const auto lib = encode_image(net, x);
      const auto lib_dec = decode_image(net, bytes);
      if (a.shape() != b.shape() || !std::equal(a.data().begin(), a.data().end(), b.data().begin()))
        why = "decode differs from --verify reconstruction";
      else if (!testing::bit_equal(a, quantize_8bit(lib_dec.x_hat)) || !testing::bit_equal(lib.x_hat, lib_dec.x_hat))
        why = "library decode differs";
      else if (lib.bytes != bytes)
        why = "CLI and library streams differ";
      else if (enc.out.rfind(want, 0) != 0)
        why = "reported '" + enc.out.substr(0, enc.out.find(' ')) + "' vs " + want;
      else if (stream_bpp(bytes.size(), w, h) != bits / pixels)
        why = "stream_bpp differs from bits / pixels";
    }
    if (why.empty())
      ++passed;
    else
      failures += " " + std::to_string(h) + "x" + std::to_string(w) + ": " + why + ";";
  }
  return {passed == static_cast<int>(sizes.size()),
          std::to_string(passed) + "/" + std::to_string(sizes.size()) + " images bit-exact with exact bpp" + failures};
}

// ---- 6 ---------------------------------------------------------------------

Verdict toy_training() {
  bool ok = true;
  std::string detail;
  for (uint64_t seed : {1, 2}) {
    const auto& h = desk_train({.seed = seed}).history;
    const double s10 = smoothed_loss(h, 10), s_end = smoothed_loss(h, kDeskSteps);
    const double drop = 1.0 - s_end / s10;
    ok = ok && drop >= 0.30;
    detail += std::string(detail.empty() ? "" : "; ") + "seed " + std::to_string(seed) + fmt(": %.1f", s10) +
              fmt(" -> %.1f", s_end) + fmt(" (drop %.1f%%)", 100 * drop);
  }
  return {ok, detail};
}

// ---- 7 ---------------------------------------------------------------------

Verdict rd_trend() {
  std::vector<NamedImage> eval;
  for (uint64_t i = 0; i < 8; ++i) eval.push_back({"h" + std::to_string(i), quantize_8bit(synthetic_image(128, 128, 900 + i))});
  std::vector<double> bpp, psnr;
  std::string detail;
  for (double lambda : {0.0045, 0.0483, 0.14}) {
    auto net = desk_train({.lambda = lambda, .steps = kRdSteps, .lr = kRdLr, .varied = true}).net;
    const auto report = evaluate_images(net, eval, eval_threads());
    bpp.push_back(report.mean.bpp);
    psnr.push_back(report.mean.psnr_db);
    detail += fmt(" lambda %g:", lambda) + fmt(" %.4f bpp", report.mean.bpp) + fmt(" %.2f dB;", report.mean.psnr_db);
  }
  const bool bpp_up = bpp[0] < bpp[1] && bpp[1] < bpp[2];
  const int violations = (psnr[1] < psnr[0]) + (psnr[2] < psnr[1]);
  return {bpp_up && violations <= 1, detail.substr(1) + " psnr violations " + std::to_string(violations)};
}

// ---- 8 ---------------------------------------------------------------------

Verdict ablation() {
  const double full = heldout_loss(desk_train({}).net);
  const double ablated = heldout_loss(desk_train({.full = false}).net);
  return {full <= 1.01 * ablated, fmt("held-out L after %.0f steps:", kDeskSteps) + fmt(" full %.2f", full) +
                                      fmt(", without attention and feature coding %.2f", ablated)};
}

// ---- 9 ---------------------------------------------------------------------

Verdict metric_conversions() {
  double worst = 0;
  auto near = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };
  near(psnr_from_mse(0.01), 20.0);
  near(psnr_from_mse(0.001), 30.0);
  near(msssim_to_db(0.9), 10.0);
  near(msssim_to_db(0.99), 20.0);
  Rng rng(99);
  for (int i = 0; i < 10000; ++i) {
    const double mse = std::exp(rng.uniform(std::log(1e-9), 0.0));
    near(psnr_from_mse(mse), static_cast<double>(-10.0L * std::log(static_cast<long double>(mse)) / std::log(10.0L)));
    const double m = rng.uniform(0.0, 1.0 - 1e-9);
    near(msssim_to_db(m), static_cast<double>(-10.0L * std::log1p(-static_cast<long double>(m)) / std::log(10.0L)));
  }
  // Eval rows against the scalar formula on the 8-bit reconstruction.
  auto net = CodecNet<float>::create([] {
    ModelConfig c;
    c.n = c.m = 8;
    c.heads = 2;
    c.feature_growth = 4;
    c.seed = 3;
    return c;
  }());
  const auto x = quantize_8bit(synthetic_image(48, 40, 77));
  const auto report = evaluate_images(net, {{"x", x}}, 1);
  const auto xr = quantize_8bit(decode_image(net, encode_image(net, x).bytes).x_hat);
  long double se = 0;
  for (size_t i = 0; i < x.data().size(); ++i) {
    const long double d = static_cast<long double>(x.data()[i]) - static_cast<long double>(xr.data()[i]);
    se += d * d;
  }
  const auto& row = report.rows.at(0);
  near(row.psnr_db, static_cast<double>(-10.0L * std::log10(se / static_cast<long double>(x.data().size()))));
  near(row.msssim_db, static_cast<double>(-10.0L * std::log10(1.0L - static_cast<long double>(row.msssim))));
  return {worst <= 1e-9, fmt("max abs error %.2e dB over 20006 conversions", worst)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  Verdict (*run)();
};

}  // namespace
}  // namespace cwic

int main(int argc, char** argv) {
  using namespace cwic;
  const std::vector<Criterion> all = {
      {1, "entropy transport", 30, entropy_transport},
      {2, "rate fidelity", 60, rate_fidelity},
      {3, "gradient suite", 300, gradient_suite},
      {4, "cwam receptive field", 0, cwam_receptive_field},
      {5, "codec round trip", 0, codec_round_trip},
      {6, "toy training descent", 1800, toy_training},
      {7, "rd trend", 7200, rd_trend},
      {8, "ablation", 0, ablation},
      {9, "metric conversions", 0, metric_conversions},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    // Shared training runs are charged to whichever criterion triggers them.
    const bool in_time = c.budget_s == 0 || secs < c.budget_s;
    const bool pass = v.pass && in_time;
    failed += pass ? 0 : 1;
    std::printf("criterion %d %-22s %s  %8.1fs  %s%s\n", c.id, c.name, pass ? "PASS" : "FAIL", secs, v.detail.c_str(),
                in_time ? "" : " (over time budget)");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

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

#include "selfcheck.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cwic/codec/image_codec.h"
#include "cwic/cwam/cwam.h"
#include "cwic/entropy/cdf.h"
#include "cwic/errors.h"
#include "cwic/nn/layers.h"
#include "cwic/tensor/gradcheck.h"
#include "cwic/train/checkpoint.h"
#include "cwic/train/image_io.h"

namespace cwic {

namespace {

using TD = Tensor<double>;

// A failed check throws with a one-line reason.
struct Failure {
  std::string why;
};

void require(bool ok, const std::string& why) {
  if (!ok) throw Failure{why};
}

TD random_td(Shape s, Rng& rng, double lo = -1, double hi = 1) {
  std::vector<double> v(static_cast<size_t>(s.numel()));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return TD(s, std::move(v));
}

TD weighted(const TD& x, uint64_t seed) {
  Rng rng(seed);
  return sum(mul(x, random_td(x.shape(), rng)));
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.n = 8;
  c.m = 8;
  c.hyper = 4;
  c.heads = 2;
  c.feature_growth = 4;
  c.seed = 5;
  return c;
}

void check_coder() {
  Rng rng(1);
  std::vector<CdfTable> tables;
  std::vector<int32_t> values;
  for (int i = 0; i < 5000; ++i) {
    const double mu = rng.uniform(-20, 20), sigma = rng.uniform(0.11, 30);
    tables.push_back(gaussian_table(mu, sigma));
    auto v = static_cast<int32_t>(std::lround(mu + sigma * rng.normal()));
    if (i % 97 == 0) v = static_cast<int32_t>(rng.below(1u << 28)) - (1 << 27);
    values.push_back(v);
  }
  require(rc_decode(rc_encode(values, tables), tables) == values, "decoded symbols differ");
}

void check_tables() {
  Rng rng(2);
  for (int i = 0; i < 500; ++i) {
    const auto t = gaussian_table(rng.uniform(-100, 100), kSigmaMin * std::exp(rng.uniform(0, 8)));
    require(t.cdf.front() == 0 && t.cdf.back() == kCdfTotal, "CDF endpoints wrong");
    for (size_t k = 1; k < t.cdf.size(); ++k) require(t.cdf[k] > t.cdf[k - 1], "zero-frequency symbol");
  }
}

void check_grad(const char* what, double tol, const std::function<TD(const std::vector<TD>&)>& fn,
                const std::function<std::vector<TD>(Rng&)>& make) {
  for (uint64_t seed = 1; seed <= 3; ++seed) {
    Rng rng(seed);
    const auto r = grad_check(fn, make(rng));
    require(r.max_rel_error < tol && r.skipped == 0,
            std::string(what) + " seed " + std::to_string(seed) + ": " + r.worst);
  }
}

void check_grad_conv() {
  check_grad(
      "conv", 1e-5,
      [](const std::vector<TD>& v) { return weighted(conv2d(v[0], v[1], v[2], 2, 1), 9); },
      [](Rng& rng) {
        return std::vector<TD>{random_td(Shape{1, 2, 6, 6}, rng), random_td(Shape{3, 2, 3, 3}, rng),
                               random_td(Shape{1, 3, 1, 1}, rng)};
      });
}

void check_grad_gdn() {
  check_grad(
      "gdn", 1e-4,
      [](const std::vector<TD>& v) {
        auto p = GdnParams<double>::create(3, false);
        p.beta_raw = v[1];
        p.gamma_raw = v[2];
        return weighted(gdn(v[0], p), 10);
      },
      [](Rng& rng) {
        return std::vector<TD>{random_td(Shape{1, 3, 4, 4}, rng), random_td(Shape{1, 3, 1, 1}, rng, 0.5, 1.5),
                               random_td(Shape{3, 3, 1, 1}, rng, 0.1, 0.5)};
      });
}

void check_grad_likelihood() {
  check_grad(
      "gaussian_likelihood", 1e-4,
      [](const std::vector<TD>& v) { return weighted(gaussian_likelihood(v[0], v[1], v[2]), 11); },
      [](Rng& rng) {
        return std::vector<TD>{random_td(Shape{1, 2, 3, 3}, rng, -3, 3), random_td(Shape{1, 2, 3, 3}, rng, -2, 2),
                               random_td(Shape{1, 2, 3, 3}, rng, 0.3, 3)};
      });
}

void check_cwam_shape() {
  Rng rng(3);
  const auto p = CwamParams<double>::create(4, 2, 4, rng);
  for (auto [h, w] : {std::pair<int64_t, int64_t>{16, 16}, {10, 7}, {1, 1}}) {
    const TD f = random_td(Shape{1, 4, h, w}, rng);
    require(cwam_forward(f, p).shape() == f.shape(), "output shape differs from input " + f.shape().str());
  }
}

// Perturbs one interior pixel and compares the changed outputs with the
// windows whose 2w x 2w context covers it.
void check_cwam_reach() {
  const int64_t w = 4, c = 4, n = 32, pr = 13, pc = 18;
  Rng rng(4);
  const auto p = CwamParams<double>::create(c, 2, w, rng);
  const TD f = random_td(Shape{1, c, n, n}, rng);
  std::vector<double> v(f.data().begin(), f.data().end());
  for (int64_t ch = 0; ch < c; ++ch) v[static_cast<size_t>((ch * n + pr) * n + pc)] += 0.5;
  const TD a = cwam_forward(f, p), b = cwam_forward(TD(f.shape(), v), p);
  std::set<std::pair<int64_t, int64_t>> changed, want;
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j) {
      for (int64_t ch = 0; ch < c; ++ch)
        if (a.at(0, ch, i, j) != b.at(0, ch, i, j)) {
          changed.emplace(i, j);
          break;
        }
      const int64_t gi = i / w * w, gj = j / w * w;
      const bool covers = pr >= gi - w / 2 && pr < gi + w + w / 2 && pc >= gj - w / 2 && pc < gj + w + w / 2;
      if (covers || (i == pr && j == pc)) want.emplace(i, j);
    }
  require(changed == want, "influence set has " + std::to_string(changed.size()) + " pixels, expected " +
                               std::to_string(want.size()));
}

void check_codec() {
  auto net = CodecNet<float>::create(tiny_config());
  const auto x = quantize_8bit(synthetic_image(37, 50, 6));
  const auto enc = encode_image(net, x);
  const auto dec = decode_image(net, enc.bytes);
  require(dec.x_hat.shape() == x.shape(), "decoded shape differs");
  for (size_t i = 0; i < dec.x_hat.data().size(); ++i)
    require(dec.x_hat.data()[i] == enc.x_hat.data()[i], "decoder reconstruction differs from the encoder's");
  auto other = CodecNet<float>::create([] {
    auto c = tiny_config();
    c.seed = 6;
    return c;
  }());
  bool refused = false;
  try {
    decode_image(other, enc.bytes);
  } catch (const ModelMismatchError&) {
    refused = true;
  }
  require(refused, "stream decoded by the wrong model");
}

void check_checkpoint(const std::optional<std::filesystem::path>& path) {
  if (path) {
    Checkpoint<float> ck = [&] {
      try {
        return load_checkpoint<float>(*path);
      } catch (const Error& e) {
        throw Failure{e.what()};
      }
    }();
    const auto bytes = checkpoint_bytes(ck.net, ck.step, ck.adam ? &*ck.adam : nullptr);
    auto again = parse_checkpoint<float>(bytes);
    require(checkpoint_bytes(again.net, again.step, again.adam ? &*again.adam : nullptr) == bytes,
            "re-serialized checkpoint differs");
    return;
  }
  auto net = CodecNet<float>::create(tiny_config());
  auto bytes = checkpoint_bytes(net, 1);
  auto back = parse_checkpoint<float>(bytes);
  require(checkpoint_bytes(back.net, 1) == bytes, "checkpoint round trip differs");
  bytes[4] ^= 0x40;
  bool refused = false;
  try {
    parse_checkpoint<float>(bytes);
  } catch (const FormatError&) {
    refused = true;
  }
  require(refused, "checkpoint with another version accepted");
}

}  // namespace

bool run_selfcheck(const std::optional<std::filesystem::path>& checkpoint, std::ostream& out) {
  const std::vector<std::pair<const char*, std::function<void()>>> checks = {
      {"range coder round trip", check_coder},
      {"gaussian cdf tables", check_tables},
      {"gradient: conv", check_grad_conv},
      {"gradient: gdn", check_grad_gdn},
      {"gradient: gaussian_likelihood", check_grad_likelihood},
      {"cwam shape", check_cwam_shape},
      {"cwam receptive field", check_cwam_reach},
      {"codec round trip", check_codec},
      {"checkpoint", [&] { check_checkpoint(checkpoint); }},
  };
  bool all = true;
  for (const auto& [name, fn] : checks) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    try {
      fn();
    } catch (const Failure& f) {
      ok = false;
      detail = f.why;
    } catch (const std::exception& e) {
      ok = false;
      detail = e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char line[128];
    std::snprintf(line, sizeof(line), "%-32s %-4s %7.2fs", name, ok ? "PASS" : "FAIL", secs);
    out << line << (detail.empty() ? "" : "  " + detail) << "\n";
    all = all && ok;
  }
  out << (all ? "selfcheck: all checks passed\n" : "selfcheck: FAILED\n");
  return all;
}

}  // namespace cwic

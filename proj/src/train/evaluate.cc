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

#include "cwic/train/evaluate.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <istream>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "cwic/codec/image_codec.h"
#include "cwic/errors.h"
#include "cwic/train/metrics.h"

namespace cwic {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Tensor<double> to_double(const ImageTensor& x) {
  return Tensor<double>(x.shape(), std::vector<double>(x.data().begin(), x.data().end()));
}

RDPoint score(CodecNet<float>& net, const NamedImage& item) {
  const ImageTensor& x = item.image;
  const auto enc = encode_image(net, x);
  const auto dec = decode_image(net, enc.bytes);
  if (dec.x_hat.shape() != enc.x_hat.shape() ||
      !std::equal(dec.x_hat.data().begin(), dec.x_hat.data().end(), enc.x_hat.data().begin()))
    throw Error(item.name + ": decoder reconstruction differs from the encoder's");

  RDPoint p;
  p.file = item.name;
  p.bpp = stream_bpp(enc.bytes.size(), x.dim(3), x.dim(2));
  const Tensor<double> a = to_double(x), b = to_double(quantize_8bit(dec.x_hat));
  double se = 0;
  for (size_t i = 0; i < a.data().size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    se += d * d;
  }
  p.psnr_db = psnr_from_mse(se / static_cast<double>(a.numel()));
  const int scales = ms_ssim_max_scales(x.dim(2), x.dim(3));
  if (scales > 0) {
    NoGradGuard no_grad;
    p.msssim = ms_ssim(a, b, scales).item();
    p.msssim_db = msssim_to_db(p.msssim);
  } else {
    p.msssim = p.msssim_db = kNaN;
  }
  return p;
}

double mean_finite(const std::vector<RDPoint>& rows, double RDPoint::*field) {
  double sum = 0;
  int64_t n = 0;
  for (const auto& r : rows)
    if (std::isfinite(r.*field)) {
      sum += r.*field;
      ++n;
    }
  return n ? sum / static_cast<double>(n) : kNaN;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

double parse_field(const std::string& s) {
  if (s == "nan") return kNaN;
  size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw FormatError("CSV field '" + s + "' is not a number");
  }
  if (used != s.size()) throw FormatError("CSV field '" + s + "' is not a number");
  return v;
}

}  // namespace

EvalReport evaluate_images(CodecNet<float>& net, const std::vector<NamedImage>& images, int threads) {
  EvalReport report;
  report.rows.resize(images.size());
  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (size_t i = next++; i < images.size(); i = next++) {
      try {
        report.rows[i] = score(net, images[i]);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = images.size();
      }
    }
  };
  const int n = std::clamp<int>(threads, 1, static_cast<int>(std::max<size_t>(images.size(), 1)));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  report.mean.file = "mean";
  report.mean.bpp = mean_finite(report.rows, &RDPoint::bpp);
  report.mean.psnr_db = mean_finite(report.rows, &RDPoint::psnr_db);
  report.mean.msssim = mean_finite(report.rows, &RDPoint::msssim);
  report.mean.msssim_db = mean_finite(report.rows, &RDPoint::msssim_db);
  return report;
}

EvalReport evaluate_files(CodecNet<float>& net, const std::vector<std::filesystem::path>& files, int threads,
                          std::ostream& warn) {
  std::vector<NamedImage> images;
  int64_t skipped = 0;
  for (const auto& f : files) {
    try {
      images.push_back({f.filename().string(), load_image(f)});
    } catch (const IngestError& e) {
      warn << "skipping " << e.what() << "\n";
      ++skipped;
    }
  }
  if (images.empty()) throw IngestError("no readable images to evaluate");
  EvalReport r = evaluate_images(net, images, threads);
  r.skipped = skipped;
  return r;
}

int eval_threads() {
  if (const char* env = std::getenv("CWIC_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*env == '\0' || *end != '\0' || v < 1 || v > 1024)
      throw ConfigError(std::string("CWIC_THREADS must be a positive integer, got '") + env + "'");
    return static_cast<int>(v);
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void write_csv(std::ostream& out, const EvalReport& report) {
  out << "file,bpp,psnr_db,msssim,msssim_db\n";
  auto row = [&](const RDPoint& p) {
    out << p.file << ',' << fmt(p.bpp) << ',' << fmt(p.psnr_db) << ',' << fmt(p.msssim) << ',' << fmt(p.msssim_db)
        << '\n';
  };
  for (const auto& p : report.rows) row(p);
  row(report.mean);
}

std::vector<RDPoint> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "file,bpp,psnr_db,msssim,msssim_db")
    throw FormatError("CSV header must be file,bpp,psnr_db,msssim,msssim_db");
  std::vector<RDPoint> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 5) throw FormatError("CSV row needs 5 fields: " + line);
    rows.push_back({f[0], parse_field(f[1]), parse_field(f[2]), parse_field(f[3]), parse_field(f[4])});
  }
  return rows;
}

}  // namespace cwic

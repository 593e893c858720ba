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

#include "cwic/train/image_io.h"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "cwic/errors.h"
#include "cwic/tensor/ops.h"

namespace cwic {

namespace {

ImageTensor from_interleaved(const uint8_t* px, int64_t h, int64_t w, int channels, int bytes_per_sample,
                             double maxval) {
  std::vector<float> v(static_cast<size_t>(3 * h * w));
  const int64_t plane = h * w;
  for (int64_t i = 0; i < plane; ++i) {
    for (int c = 0; c < 3; ++c) {
      const int src = channels == 1 ? 0 : c;
      const uint8_t* s = px + (i * channels + src) * bytes_per_sample;
      const unsigned sample = bytes_per_sample == 1 ? s[0] : (static_cast<unsigned>(s[0]) << 8) | s[1];
      v[static_cast<size_t>(c * plane + i)] = static_cast<float>(sample / maxval);
    }
  }
  return ImageTensor(Shape{1, 3, h, w}, std::move(v));
}

std::vector<uint8_t> to_rgb8(const ImageTensor& img) {
  if (img.dim(0) != 1 || img.dim(1) != 3) throw DimensionError("image must be [1, 3, H, W], got " + img.shape().str());
  const int64_t plane = img.dim(2) * img.dim(3);
  const auto d = img.data();
  std::vector<uint8_t> out(static_cast<size_t>(3 * plane));
  for (int64_t i = 0; i < plane; ++i)
    for (int c = 0; c < 3; ++c) {
      const float v = std::clamp(d[static_cast<size_t>(c * plane + i)], 0.0f, 1.0f);
      out[static_cast<size_t>(3 * i + c)] = static_cast<uint8_t>(std::lround(v * 255.0f));
    }
  return out;
}

ImageTensor decode_png(std::span<const uint8_t> bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw IngestError(std::string("unreadable PNG: ") + image.message);
  image.format = PNG_FORMAT_RGB;
  std::vector<uint8_t> px(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IngestError("corrupt PNG: " + msg);
  }
  return from_interleaved(px.data(), image.height, image.width, 3, 1, 255.0);
}

class PnmHeader {
 public:
  explicit PnmHeader(std::span<const uint8_t> bytes) : b_(bytes) {}

  int64_t number() {
    skip_space();
    if (pos_ >= b_.size() || !std::isdigit(b_[pos_])) throw IngestError("malformed PPM header");
    int64_t v = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + (b_[pos_++] - '0');
      if (v > (int64_t{1} << 24)) throw IngestError("PPM header value out of range");
    }
    return v;
  }

  // Exactly one whitespace byte separates the header from the samples.
  size_t data_start() {
    if (pos_ >= b_.size() || !std::isspace(b_[pos_])) throw IngestError("malformed PPM header");
    return pos_ + 1;
  }

 private:
  void skip_space() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(b_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const uint8_t> b_;
  size_t pos_ = 2;
};

ImageTensor decode_pnm(std::span<const uint8_t> bytes) {
  const int channels = bytes[1] == '6' ? 3 : 1;
  PnmHeader hdr(bytes);
  const int64_t w = hdr.number(), h = hdr.number(), maxval = hdr.number();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw IngestError("PPM header has invalid dimensions or maxval");
  const int bps = maxval > 255 ? 2 : 1;
  const size_t start = hdr.data_start();
  const auto need = static_cast<size_t>(w * h * channels * bps);
  if (bytes.size() < start || bytes.size() - start < need) throw IngestError("PPM data truncated");
  return from_interleaved(bytes.data() + start, h, w, channels, bps, static_cast<double>(maxval));
}

bool has_image_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".ppm" || ext == ".pgm" || ext == ".pnm";
}

}  // namespace

ImageTensor decode_image_bytes(std::span<const uint8_t> bytes) {
  static constexpr uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::equal(kPngSig, kPngSig + 8, bytes.begin())) return decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '6' || bytes[1] == '5')) return decode_pnm(bytes);
  throw IngestError("unsupported image format (expected PNG or binary PPM/PGM)");
}

ImageTensor load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open image " + path.string());
  const std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_image_bytes(bytes);
  } catch (const IngestError& e) {
    throw IngestError(path.string() + ": " + e.what());
  }
}

std::vector<uint8_t> encode_png(const ImageTensor& img) {
  const auto rgb = to_rgb8(img);
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.dim(3));
  image.height = static_cast<png_uint_32>(img.dim(2));
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(image, size, 0, rgb.data(), 0, nullptr))
    throw IngestError(std::string("PNG encoding failed: ") + image.message);
  std::vector<uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, rgb.data(), 0, nullptr))
    throw IngestError(std::string("PNG encoding failed: ") + image.message);
  out.resize(size);
  return out;
}

std::vector<uint8_t> encode_ppm(const ImageTensor& img) {
  const auto rgb = to_rgb8(img);
  const std::string header = "P6\n" + std::to_string(img.dim(3)) + " " + std::to_string(img.dim(2)) + "\n255\n";
  std::vector<uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), rgb.begin(), rgb.end());
  return out;
}

void save_image(const std::filesystem::path& path, const ImageTensor& img) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  const auto bytes = ext == ".png" ? encode_png(img) : encode_ppm(img);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IngestError("cannot write image " + path.string());
}

ImageTensor quantize_8bit(const ImageTensor& img) {
  std::vector<float> v(img.data().begin(), img.data().end());
  for (auto& x : v) x = static_cast<float>(std::lround(std::clamp(x, 0.0f, 1.0f) * 255.0f)) / 255.0f;
  return ImageTensor(img.shape(), std::move(v));
}

bool crop_fits(int64_t height, int64_t width, int64_t size) { return height >= size && width >= size; }

ImageTensor random_crop(const ImageTensor& img, int64_t size, Rng& rng) {
  const int64_t h = img.dim(2), w = img.dim(3);
  if (!crop_fits(h, w, size))
    throw IngestError("image " + std::to_string(w) + "x" + std::to_string(h) + " is smaller than the crop size " +
                      std::to_string(size));
  const auto top = static_cast<int64_t>(rng.below(static_cast<uint64_t>(h - size + 1)));
  const auto left = static_cast<int64_t>(rng.below(static_cast<uint64_t>(w - size + 1)));
  return crop2d(img, top, left, size, size);
}

ImageTensor hflip(const ImageTensor& img) {
  const int64_t rows = img.dim(0) * img.dim(1) * img.dim(2), w = img.dim(3);
  const auto d = img.data();
  std::vector<float> v(d.size());
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t x = 0; x < w; ++x) v[static_cast<size_t>(r * w + x)] = d[static_cast<size_t>(r * w + (w - 1 - x))];
  return ImageTensor(img.shape(), std::move(v));
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && has_image_extension(e.path())) out.push_back(e.path());
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  return out;
}

ImageTensor synthetic_image(int64_t height, int64_t width, uint64_t seed) {
  Rng rng(seed);
  double corner[4][3];
  for (auto& c : corner)
    for (auto& v : c) v = rng.uniform(0.1, 0.9);
  struct Disc {
    double cy, cx, r, soft, color[3];
  };
  std::vector<Disc> discs(3 + rng.below(4));
  for (auto& d : discs) {
    d.cy = rng.uniform(0, height);
    d.cx = rng.uniform(0, width);
    d.r = rng.uniform(0.1, 0.35) * static_cast<double>(std::min(height, width));
    d.soft = rng.uniform(0.5, 3.0);
    for (auto& v : d.color) v = rng.uniform(0, 1);
  }
  const double freq = rng.uniform(0.2, 0.8), angle = rng.uniform(0, 3.14159), stripe = rng.uniform(0, 0.15);

  std::vector<float> v(static_cast<size_t>(3 * height * width));
  for (int64_t y = 0; y < height; ++y) {
    for (int64_t x = 0; x < width; ++x) {
      const double fy = height > 1 ? static_cast<double>(y) / (height - 1) : 0.0;
      const double fx = width > 1 ? static_cast<double>(x) / (width - 1) : 0.0;
      const double s = stripe * std::sin(freq * (x * std::cos(angle) + y * std::sin(angle)));
      for (int c = 0; c < 3; ++c) {
        double p = (1 - fy) * ((1 - fx) * corner[0][c] + fx * corner[1][c]) +
                   fy * ((1 - fx) * corner[2][c] + fx * corner[3][c]);
        for (const auto& d : discs) {
          const double dist = std::hypot(y - d.cy, x - d.cx);
          const double a = 1.0 / (1.0 + std::exp((dist - d.r) / d.soft));
          p = (1 - a) * p + a * d.color[c];
        }
        p += s + rng.uniform(-0.02, 0.02);
        v[static_cast<size_t>((c * height + y) * width + x)] = static_cast<float>(std::clamp(p, 0.0, 1.0));
      }
    }
  }
  return ImageTensor(Shape{1, 3, height, width}, std::move(v));
}

}  // namespace cwic

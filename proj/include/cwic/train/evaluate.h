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
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cwic/codec/model.h"
#include "cwic/train/image_io.h"

namespace cwic {

// msssim and msssim_db are NaN for images too small for one SSIM window.
struct RDPoint {
  std::string file;
  double bpp = 0;
  double psnr_db = 0;
  double msssim = 0;
  double msssim_db = 0;
};

struct EvalReport {
  std::vector<RDPoint> rows;  // input order
  RDPoint mean;               // file == "mean"; NaN entries are left out
  int64_t skipped = 0;
};

struct NamedImage {
  std::string name;
  ImageTensor image;
};

// Encodes each image to a real bitstream, decodes it back and scores the
// 8-bit reconstruction against the original. bpp counts every byte of the
// stream over the original pixel count. Work is spread over `threads`
// workers; the result does not depend on the thread count.
EvalReport evaluate_images(CodecNet<float>& net, const std::vector<NamedImage>& images, int threads);

// Same over files; unreadable ones are skipped with a note on `warn`.
// IngestError when every file is skipped.
EvalReport evaluate_files(CodecNet<float>& net, const std::vector<std::filesystem::path>& files, int threads,
                          std::ostream& warn);

// CWIC_THREADS when set (a positive integer, else ConfigError), otherwise
// the hardware concurrency.
int eval_threads();

// Header file,bpp,psnr_db,msssim,msssim_db, one row per image, then the
// mean row.
void write_csv(std::ostream& out, const EvalReport& report);
// Rows of a CSV written by write_csv, including the mean row. FormatError
// on a wrong header or malformed row.
std::vector<RDPoint> read_csv(std::istream& in);

}  // namespace cwic

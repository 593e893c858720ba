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

#include <string>
#include <vector>

#include "cwic/train/evaluate.h"

namespace cwic {

struct RDCurve {
  std::string label;
  std::vector<RDPoint> points;  // one per model, any order
};

// The "mean" row of an eval CSV, or the mean of its rows when it has none.
// FormatError when there are no rows at all.
RDPoint summary_point(const std::vector<RDPoint>& rows);

// Two panels, bpp vs PSNR and bpp vs MS-SSIM (dB). Points are joined in
// bpp order; a curve with one point is drawn as a lone marker. Points with
// a NaN value are left out of that panel.
std::string render_rd_svg(const std::vector<RDCurve>& curves);

}  // namespace cwic

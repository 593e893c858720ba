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

#include "cwic/train/plot.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "cwic/errors.h"

namespace cwic {

namespace {

constexpr double kPanelW = 420, kPanelH = 320, kMarginL = 60, kMarginB = 50, kMarginT = 30, kGap = 40;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string label_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }

  // Padded by 5%; empty or flat ranges get a unit span.
  void finish() {
    if (!(lo <= hi)) {
      lo = 0;
      hi = 1;
    } else if (hi - lo < 1e-9) {
      lo -= 0.5;
      hi += 0.5;
    } else {
      const double pad = 0.05 * (hi - lo);
      lo -= pad;
      hi += pad;
    }
  }
};

std::vector<double> ticks(const Range& r) {
  const double raw = (r.hi - r.lo) / 5;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  std::vector<double> out;
  for (double t = std::ceil(r.lo / step) * step; t <= r.hi + 1e-12; t += step) out.push_back(std::abs(t) < 1e-12 ? 0 : t);
  return out;
}

void panel(std::ostringstream& svg, const std::vector<RDCurve>& curves, double RDPoint::*field, const std::string& ylabel,
           double x0) {
  Range xr, yr;
  for (const auto& c : curves)
    for (const auto& p : c.points)
      if (std::isfinite(p.bpp) && std::isfinite(p.*field)) {
        xr.add(p.bpp);
        yr.add(p.*field);
      }
  xr.finish();
  yr.finish();
  const double left = x0 + kMarginL, top = kMarginT, w = kPanelW - kMarginL - 10, h = kPanelH - kMarginT - kMarginB;
  auto px = [&](double v) { return left + (v - xr.lo) / (xr.hi - xr.lo) * w; };
  auto py = [&](double v) { return top + h - (v - yr.lo) / (yr.hi - yr.lo) * h; };

  svg << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
      << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (double t : ticks(xr)) {
    svg << "<line x1=\"" << num(px(t)) << "\" y1=\"" << num(top + h) << "\" x2=\"" << num(px(t)) << "\" y2=\""
        << num(top + h + 5) << "\" stroke=\"#333\"/>\n";
    svg << "<text x=\"" << num(px(t)) << "\" y=\"" << num(top + h + 18) << "\" text-anchor=\"middle\">"
        << label_num(t) << "</text>\n";
  }
  for (double t : ticks(yr)) {
    svg << "<line x1=\"" << num(left - 5) << "\" y1=\"" << num(py(t)) << "\" x2=\"" << num(left) << "\" y2=\""
        << num(py(t)) << "\" stroke=\"#333\"/>\n";
    svg << "<text x=\"" << num(left - 8) << "\" y=\"" << num(py(t) + 4) << "\" text-anchor=\"end\">" << label_num(t)
        << "</text>\n";
  }
  svg << "<text x=\"" << num(left + w / 2) << "\" y=\"" << num(kPanelH - 12)
      << "\" text-anchor=\"middle\">Rate (bpp)</text>\n";
  svg << "<text transform=\"translate(" << num(x0 + 16) << "," << num(top + h / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(ylabel) << "</text>\n";

  for (size_t ci = 0; ci < curves.size(); ++ci) {
    const char* color = kColors[ci % std::size(kColors)];
    std::vector<RDPoint> pts;
    for (const auto& p : curves[ci].points)
      if (std::isfinite(p.bpp) && std::isfinite(p.*field)) pts.push_back(p);
    std::stable_sort(pts.begin(), pts.end(), [](const RDPoint& a, const RDPoint& b) { return a.bpp < b.bpp; });
    if (pts.size() > 1) {
      svg << "<polyline class=\"curve\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (size_t i = 0; i < pts.size(); ++i) svg << (i ? " " : "") << num(px(pts[i].bpp)) << "," << num(py(pts[i].*field));
      svg << "\"/>\n";
    }
    for (const auto& p : pts)
      svg << "<circle class=\"marker\" cx=\"" << num(px(p.bpp)) << "\" cy=\"" << num(py(p.*field))
          << "\" r=\"4\" fill=\"" << color << "\"/>\n";
  }
}

}  // namespace

RDPoint summary_point(const std::vector<RDPoint>& rows) {
  if (rows.empty()) throw FormatError("eval CSV has no rows");
  for (const auto& r : rows)
    if (r.file == "mean") return r;
  RDPoint m;
  m.file = "mean";
  for (double RDPoint::*f : {&RDPoint::bpp, &RDPoint::psnr_db, &RDPoint::msssim, &RDPoint::msssim_db}) {
    double sum = 0;
    int n = 0;
    for (const auto& r : rows)
      if (std::isfinite(r.*f)) {
        sum += r.*f;
        ++n;
      }
    m.*f = n ? sum / n : std::numeric_limits<double>::quiet_NaN();
  }
  return m;
}

std::string render_rd_svg(const std::vector<RDCurve>& curves) {
  const double width = 2 * kPanelW + kGap, legend_h = 20.0 * static_cast<double>(curves.size()) + 10;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(kPanelH + legend_h)
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  panel(svg, curves, &RDPoint::psnr_db, "PSNR (dB)", 0);
  panel(svg, curves, &RDPoint::msssim_db, "MS-SSIM (dB)", kPanelW + kGap);
  for (size_t ci = 0; ci < curves.size(); ++ci) {
    const double y = kPanelH + 15 + 20.0 * static_cast<double>(ci);
    svg << "<circle cx=\"" << num(kMarginL + 6) << "\" cy=\"" << num(y - 4) << "\" r=\"4\" fill=\""
        << kColors[ci % std::size(kColors)] << "\"/>\n";
    svg << "<text x=\"" << num(kMarginL + 16) << "\" y=\"" << num(y) << "\">" << escape(curves[ci].label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace cwic

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

#include "cwic/entropy/cdf.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "cwic/errors.h"

namespace cwic {

namespace {

double normal_cdf_scalar(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// t with Phi(-t) = kTableTailMass, by bisection.
double tail_multiplier() {
  static const double t = [] {
    double lo = 0.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (normal_cdf_scalar(-mid) > kTableTailMass ? lo : hi) = mid;
    }
    return hi;
  }();
  return t;
}

CdfTable table_from_pmf(std::vector<double> pmf, int32_t offset, double escape_mass) {
  pmf.push_back(std::max(escape_mass, 0.0));
  CdfTable t;
  t.cdf = quantize_pmf(pmf);
  t.offset = offset;
  t.has_escape = true;
  return t;
}

}  // namespace

std::vector<uint32_t> quantize_pmf(std::span<const double> pmf) {
  const size_t n = pmf.size();
  if (n == 0) throw ContractError("cdf table: empty symbol range");
  if (n > kCdfTotal) throw ContractError("cdf table: more symbols than quantization units");
  double total = 0.0;
  for (double p : pmf) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ContractError("cdf table: masses must be finite and >= 0");
    total += p;
  }
  const auto spare = static_cast<int64_t>(kCdfTotal - n);
  std::vector<int64_t> freq(n, 1);
  std::vector<double> rem(n, 0.0);
  int64_t assigned = 0;
  if (total > 0.0) {
    for (size_t i = 0; i < n; ++i) {
      const double ideal = pmf[i] / total * static_cast<double>(spare);
      const double whole = std::floor(ideal);
      freq[i] += static_cast<int64_t>(whole);
      rem[i] = ideal - whole;
      assigned += static_cast<int64_t>(whole);
    }
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return rem[a] > rem[b]; });
  int64_t left = spare - assigned;
  for (size_t k = 0; left > 0; k = (k + 1) % n, --left) ++freq[order[k]];
  // Rounding can overshoot by a unit or so; take it back from the largest.
  while (left < 0) {
    const auto it = std::max_element(freq.begin(), freq.end());
    --*it;
    ++left;
  }
  std::vector<uint32_t> cdf(n + 1, 0);
  for (size_t i = 0; i < n; ++i) cdf[i + 1] = cdf[i] + static_cast<uint32_t>(freq[i]);
  return cdf;
}

double gaussian_interval_probability(double y, double mu, double sigma) {
  const double d = std::abs(y - mu);
  const double p = normal_cdf_scalar((0.5 - d) / sigma) - normal_cdf_scalar((-0.5 - d) / sigma);
  return std::max(p, kLikelihoodFloor);
}

CdfTable gaussian_table(double mu, double sigma) {
  if (!std::isfinite(mu) || !(sigma > 0.0) || !std::isfinite(sigma))
    throw ContractError("gaussian table: mu and sigma must be finite, sigma > 0");
  const double half = std::min(std::ceil(tail_multiplier() * sigma), static_cast<double>(kMaxTableSymbols / 2 - 1));
  const auto lo = static_cast<int64_t>(std::floor(mu) - half);
  const auto hi = static_cast<int64_t>(std::ceil(mu) + half);
  if (lo < INT32_MIN / 2 || hi > INT32_MAX / 2) throw ContractError("gaussian table: mean out of range");
  std::vector<double> pmf;
  pmf.reserve(static_cast<size_t>(hi - lo + 2));
  double mass = 0.0;
  for (int64_t k = lo; k <= hi; ++k) {
    pmf.push_back(gaussian_interval_probability(static_cast<double>(k), mu, sigma));
    mass += pmf.back();
  }
  return table_from_pmf(std::move(pmf), static_cast<int32_t>(lo), 1.0 - mass);
}

template <typename T>
std::vector<CdfTable> factorized_tables(const FactorizedPrior<T>& prior) {
  const auto channels = static_cast<size_t>(prior.channels());
  // Widen a symmetric window of half-integer points until both tails at
  // the window edges hold at most kTableTailMass.
  int64_t reach = 64;
  std::vector<std::vector<double>> c;
  std::vector<double> points;
  for (;;) {
    points.clear();
    for (int64_t k = -reach; k <= reach + 1; ++k) points.push_back(static_cast<double>(k) - 0.5);
    c = factorized_cdf(prior, points);
    bool covered = true;
    for (const auto& row : c) covered = covered && row.front() <= kTableTailMass && 1.0 - row.back() <= kTableTailMass;
    if (covered || reach >= kMaxTableSymbols) break;
    reach *= 2;
  }
  // c[ch][j] is the CDF at (j - reach) - 1/2.
  std::vector<CdfTable> tables;
  for (size_t ch = 0; ch < channels; ++ch) {
    const auto& row = c[ch];
    const auto last = static_cast<int64_t>(row.size()) - 1;
    // Symbol j (value j - reach) spans row[j] .. row[j + 1].
    // lo: last j whose lower tail row[j] is within the tail mass.
    int64_t a = 0, b = last - 1;
    while (a < b) {
      const int64_t mid = (a + b + 1) / 2;
      if (row[static_cast<size_t>(mid)] <= kTableTailMass) {
        a = mid;
      } else {
        b = mid - 1;
      }
    }
    int64_t lo_j = a;
    // hi: first j at or after lo whose upper tail 1 - row[j + 1] is too.
    a = lo_j;
    b = last - 1;
    while (a < b) {
      const int64_t mid = (a + b) / 2;
      if (1.0 - row[static_cast<size_t>(mid + 1)] <= kTableTailMass) {
        b = mid;
      } else {
        a = mid + 1;
      }
    }
    int64_t hi_j = a;
    if (hi_j - lo_j + 1 > kMaxTableSymbols - 1) {
      const int64_t centre = (lo_j + hi_j) / 2;
      lo_j = std::clamp<int64_t>(centre - (kMaxTableSymbols / 2 - 1), 0, last - (kMaxTableSymbols - 1));
      hi_j = lo_j + kMaxTableSymbols - 2;
    }
    std::vector<double> pmf;
    for (int64_t j = lo_j; j <= hi_j; ++j)
      pmf.push_back(std::max(row[static_cast<size_t>(j + 1)] - row[static_cast<size_t>(j)], 0.0));
    const double escape = row[static_cast<size_t>(lo_j)] + (1.0 - row[static_cast<size_t>(hi_j + 1)]);
    tables.push_back(table_from_pmf(std::move(pmf), static_cast<int32_t>(lo_j - reach), escape));
  }
  return tables;
}

void encode_value(RangeEncoder& enc, const CdfTable& table, int32_t value) {
  const int64_t idx = static_cast<int64_t>(value) - table.offset;
  if (idx >= 0 && idx < table.range_size()) {
    const auto i = static_cast<size_t>(idx);
    enc.encode(table.cdf[i], table.cdf[i + 1] - table.cdf[i]);
    return;
  }
  if (!table.has_escape) throw ContractError("value outside table range and no escape symbol");
  const auto e = static_cast<size_t>(table.escape_index());
  enc.encode(table.cdf[e], table.cdf[e + 1] - table.cdf[e]);
  const auto bits = static_cast<uint32_t>(value);
  enc.encode_bits(bits >> 16, 16);
  enc.encode_bits(bits & 0xFFFFu, 16);
}

int32_t decode_value(RangeDecoder& dec, const CdfTable& table) {
  const int s = dec.decode(table.cdf);
  if (!table.has_escape || s != table.escape_index()) return table.offset + s;
  const uint32_t high = dec.decode_bits(16);
  const uint32_t low = dec.decode_bits(16);
  return static_cast<int32_t>((high << 16) | low);
}

std::vector<uint8_t> rc_encode(std::span<const int32_t> values, std::span<const CdfTable> tables) {
  if (values.size() != tables.size()) throw ContractError("rc_encode: one table per value");
  RangeEncoder enc;
  for (size_t i = 0; i < values.size(); ++i) encode_value(enc, tables[i], values[i]);
  return enc.finish();
}

std::vector<int32_t> rc_decode(std::span<const uint8_t> bytes, std::span<const CdfTable> tables) {
  RangeDecoder dec(bytes);
  std::vector<int32_t> out;
  out.reserve(tables.size());
  for (const auto& t : tables) out.push_back(decode_value(dec, t));
  dec.finish();
  return out;
}

double table_cost_bits(const CdfTable& table, int32_t value) {
  const int64_t idx = static_cast<int64_t>(value) - table.offset;
  const bool in_range = idx >= 0 && idx < table.range_size();
  const auto i = static_cast<size_t>(in_range ? idx : table.escape_index());
  const double p = static_cast<double>(table.cdf[i + 1] - table.cdf[i]) / kCdfTotal;
  return -std::log2(p) + (in_range ? 0.0 : 32.0);
}

template std::vector<CdfTable> factorized_tables(const FactorizedPrior<float>&);
template std::vector<CdfTable> factorized_tables(const FactorizedPrior<double>&);

}  // namespace cwic

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
#include <span>
#include <vector>

#include "cwic/entropy/likelihood.h"
#include "cwic/entropy/range_coder.h"

namespace cwic {

// Tail mass left outside a table's explicit symbol range, per side.
inline constexpr double kTableTailMass = 0x1.0p-10;
// Cap on explicit symbols per table; the rest goes through the escape.
inline constexpr int64_t kMaxTableSymbols = 4096;

// Quantized CDF over the integers offset .. offset + range_size() - 1,
// optionally followed by one escape symbol for anything outside.
struct CdfTable {
  std::vector<uint32_t> cdf;  // size symbols + 1, cdf[0] = 0, back() = 2^16
  int32_t offset = 0;
  bool has_escape = false;

  int64_t symbols() const { return static_cast<int64_t>(cdf.size()) - 1; }
  int64_t range_size() const { return symbols() - (has_escape ? 1 : 0); }
  int32_t max_symbol() const { return offset + static_cast<int32_t>(range_size()) - 1; }
  int64_t escape_index() const { return symbols() - 1; }  // valid when has_escape
};

// Integer frequencies summing to exactly 2^16, every entry >= 1: each
// symbol gets one unit, the remaining 2^16 - n are split in proportion to
// pmf by largest remainder (ties to the lower index). Returns the CDF.
// ContractError on an empty pmf, more than 2^16 entries, or negative /
// non-finite masses.
std::vector<uint32_t> quantize_pmf(std::span<const double> pmf);

// P(y) for y under N(mu, sigma^2) over [y - 1/2, y + 1/2], in plain double.
double gaussian_interval_probability(double y, double mu, double sigma);

// floor(mu) - ceil(t sigma) .. ceil(mu) + ceil(t sigma), t leaving
// kTableTailMass in each tail, capped at kMaxTableSymbols; escape included.
CdfTable gaussian_table(double mu, double sigma);

// One table per channel of the hyper-latent prior, bounds found by bisection
// on the learned CDF at the kTableTailMass quantiles.
template <typename T>
std::vector<CdfTable> factorized_tables(const FactorizedPrior<T>& prior);

// Codes value through its table: in-range values directly, others as the
// escape symbol followed by the 32-bit two's complement value in two
// 16-bit bypass chunks. ContractError for an out-of-range value without an
// escape.
void encode_value(RangeEncoder& enc, const CdfTable& table, int32_t value);
int32_t decode_value(RangeDecoder& dec, const CdfTable& table);

// Whole-stream helpers: value i is coded with tables[i].
std::vector<uint8_t> rc_encode(std::span<const int32_t> values, std::span<const CdfTable> tables);
std::vector<int32_t> rc_decode(std::span<const uint8_t> bytes, std::span<const CdfTable> tables);

// Ideal code length of value under its quantized table, in bits.
double table_cost_bits(const CdfTable& table, int32_t value);

}  // namespace cwic

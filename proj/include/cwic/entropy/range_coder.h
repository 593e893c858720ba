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

namespace cwic {

inline constexpr int kCdfPrecision = 16;
inline constexpr uint32_t kCdfTotal = 1u << kCdfPrecision;
// Coded after the last symbol and checked by the decoder.
inline constexpr uint32_t kStreamSentinel = 0xA5C3;

// Byte-oriented range coder: 32-bit range, carry-propagating 64-bit low,
// frequencies on a 2^16 total. The leading zero byte of the classic
// carry scheme is not emitted, and the flush writes only as many bytes as
// it takes to name a value inside the final interval.
class RangeEncoder {
 public:
  // Symbol occupying [start, start + freq) of 2^16. freq >= 1.
  void encode(uint32_t start, uint32_t freq);
  // Equiprobable value of nbits (1..16) bits.
  void encode_bits(uint32_t value, int nbits);
  // Appends the sentinel and flushes. The encoder is spent afterwards.
  std::vector<uint8_t> finish();

 private:
  void shift_low();

  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint64_t cache_size_ = 1;
  bool leading_ = true;
  std::vector<uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const uint8_t> bytes);

  // Index s with cdf[s] <= target < cdf[s + 1]; cdf spans 0 .. 2^16.
  int decode(std::span<const uint32_t> cdf);
  uint32_t decode_bits(int nbits);
  // Reads the sentinel and checks that every byte was consumed; throws
  // DecodeError otherwise.
  void finish();

 private:
  uint8_t next_byte();
  void normalize();

  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
  size_t overrun_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint32_t code_ = 0;
};

}  // namespace cwic

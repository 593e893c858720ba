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

#include "cwic/entropy/range_coder.h"

#include <algorithm>

#include "cwic/errors.h"

namespace cwic {

namespace {
constexpr uint32_t kTop = 1u << 24;
}  // namespace

void RangeEncoder::shift_low() {
  if (static_cast<uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const auto carry = static_cast<uint8_t>(low_ >> 32);
    uint8_t temp = cache_;
    do {
      if (leading_) {
        leading_ = false;
      } else {
        out_.push_back(static_cast<uint8_t>(temp + carry));
      }
      temp = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

void RangeEncoder::encode(uint32_t start, uint32_t freq) {
  if (freq == 0 || start + freq > kCdfTotal) throw ContractError("range coder: invalid frequency interval");
  const uint32_t r = range_ >> kCdfPrecision;
  low_ += static_cast<uint64_t>(r) * start;
  range_ = r * freq;
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::encode_bits(uint32_t value, int nbits) {
  if (nbits < 1 || nbits > 16 || value >= (1u << nbits)) throw ContractError("range coder: invalid bypass value");
  const uint32_t r = range_ >> nbits;
  low_ += static_cast<uint64_t>(r) * value;
  range_ = r;
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

std::vector<uint8_t> RangeEncoder::finish() {
  encode_bits(kStreamSentinel, 16);
  // Smallest number of bytes k whose value (zero-extended) lies in
  // [low, low + range); the decoder reads zeros past the end.
  const uint64_t hi = low_ + range_;
  int k = 4;
  uint64_t v = low_;
  for (int bytes = 1; bytes <= 4; ++bytes) {
    const uint64_t mask = (uint64_t{1} << (32 - 8 * bytes)) - 1;
    const uint64_t cand = (low_ + mask) & ~mask;
    if (cand < hi) {
      k = bytes;
      v = cand;
      break;
    }
  }
  low_ = v;
  for (int i = 0; i <= k; ++i) shift_low();
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const uint8_t> bytes) : bytes_(bytes) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

uint8_t RangeDecoder::next_byte() {
  if (pos_ < bytes_.size()) return bytes_[pos_++];
  if (++overrun_ > 4) throw DecodeError("range decoder: stream truncated");
  return 0;
}

void RangeDecoder::normalize() {
  while (range_ < kTop) {
    range_ <<= 8;
    code_ = (code_ << 8) | next_byte();
  }
}

int RangeDecoder::decode(std::span<const uint32_t> cdf) {
  const uint32_t r = range_ >> kCdfPrecision;
  const uint32_t target = code_ / r;
  if (target >= kCdfTotal) throw DecodeError("range decoder: corrupt stream");
  // Last entry with cdf[s] <= target.
  const auto it = std::upper_bound(cdf.begin(), cdf.end() - 1, target);
  const int s = static_cast<int>(it - cdf.begin()) - 1;
  code_ -= r * cdf[static_cast<size_t>(s)];
  range_ = r * (cdf[static_cast<size_t>(s) + 1] - cdf[static_cast<size_t>(s)]);
  normalize();
  return s;
}

uint32_t RangeDecoder::decode_bits(int nbits) {
  if (nbits < 1 || nbits > 16) throw ContractError("range decoder: invalid bypass width");
  const uint32_t r = range_ >> nbits;
  const uint32_t value = code_ / r;
  if (value >= (1u << nbits)) throw DecodeError("range decoder: corrupt stream");
  code_ -= r * value;
  range_ = r;
  normalize();
  return value;
}

void RangeDecoder::finish() {
  if (decode_bits(16) != kStreamSentinel) throw DecodeError("range decoder: end marker mismatch");
  if (pos_ != bytes_.size()) throw DecodeError("range decoder: trailing bytes after end marker");
  // The window holds the encoder's flushed value; rebuild low from it and
  // insist on the same minimal flush length, which rejects appended bytes.
  uint32_t window = 0;
  const size_t real = 4 - overrun_;
  for (size_t i = 0; i < 4; ++i) window = (window << 8) | (i < real ? bytes_[bytes_.size() - real + i] : 0u);
  const uint64_t low = static_cast<uint32_t>(window - code_);
  int k = 4;
  for (int b = 1; b <= 4; ++b) {
    const uint64_t mask = (uint64_t{1} << (32 - 8 * b)) - 1;
    if (((low + mask) & ~mask) < low + range_) {
      k = b;
      break;
    }
  }
  if (static_cast<size_t>(k) != real) throw DecodeError("range decoder: trailing bytes after end marker");
}

}  // namespace cwic

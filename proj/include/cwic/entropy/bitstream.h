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

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace cwic {

inline constexpr std::array<uint8_t, 4> kStreamMagic = {'C', 'W', 'I', 'C'};
inline constexpr uint8_t kStreamVersion = 1;

struct StreamHeader {
  uint32_t width = 0;
  uint32_t height = 0;
  uint32_t padded_width = 0;
  uint32_t padded_height = 0;
  uint64_t model_hash = 0;
  uint8_t lambda_index = 0;  // 0 when the model's lambda is off-grid
};

// Layout, all integers big-endian:
//   magic[4] version:u8 width:u32 height:u32 padded_width:u32
//   padded_height:u32 model_hash:u64 lambda_index:u8
//   z_len:u32 z_bytes[z_len] y_len:u32 y_bytes[y_len]
struct CodecBitstream {
  StreamHeader header;
  std::vector<uint8_t> z_bytes;
  std::vector<uint8_t> y_bytes;
};

std::vector<uint8_t> serialize(const CodecBitstream& stream);
// DecodeError on bad magic, unknown version, inconsistent dimensions,
// truncation or trailing bytes.
CodecBitstream parse_bitstream(std::span<const uint8_t> bytes);

}  // namespace cwic

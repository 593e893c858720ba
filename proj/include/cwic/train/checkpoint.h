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
#include <optional>
#include <span>
#include <vector>

#include "cwic/codec/model.h"
#include "cwic/tensor/adam.h"

namespace cwic {

inline constexpr std::array<uint8_t, 4> kCheckpointMagic = {'C', 'W', 'C', 'K'};
inline constexpr uint32_t kCheckpointVersion = 1;

// Binary layout, little-endian:
//   magic[4] version:u32 dtype:u8 (4 float, 8 double)
//   config: n m hyper:i64 window heads:i32 lambda:f64 metric:u8 seed:u64
//           use_cwam use_feature_coding:u8 residual_blocks:i32 growth:i64
//   step:i64 count:u32
//   count x { name_len:u16 name shape:4 x i64 values[numel] }
//   has_adam:u8 [ t:i64 then m, v per tensor in the same order ]
//   fnv1a64 of all preceding bytes:u64
template <typename T>
struct Checkpoint {
  CodecNet<T> net;
  int64_t step = 0;
  std::optional<AdamState<T>> adam;
};

template <typename T>
std::vector<uint8_t> checkpoint_bytes(CodecNet<T>& net, int64_t step, const AdamState<T>* adam = nullptr);

// FormatError for a bad magic, another version, a dtype other than T,
// checksum mismatch, truncation, trailing bytes, or parameter records that
// do not match the configured architecture.
template <typename T>
Checkpoint<T> parse_checkpoint(std::span<const uint8_t> bytes);

// Writes through a temporary file and renames it into place.
template <typename T>
void save_checkpoint(const std::filesystem::path& path, CodecNet<T>& net, int64_t step,
                     const AdamState<T>* adam = nullptr);
template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path);

}  // namespace cwic

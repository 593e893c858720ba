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

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>
#include <type_traits>
#include <utility>

namespace cwic {

// 64-bit FNV-1a. Multi-byte values are fed little-endian so digests agree
// across hosts.
class Fnv1a {
 public:
  void bytes(const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
  }

  template <typename V>
    requires std::is_arithmetic_v<V>
  void value(V v) {
    unsigned char raw[sizeof(V)];
    std::memcpy(raw, &v, sizeof(V));
    if constexpr (std::endian::native == std::endian::big) {
      for (size_t i = 0; i < sizeof(V) / 2; ++i) std::swap(raw[i], raw[sizeof(V) - 1 - i]);
    }
    bytes(raw, sizeof(V));
  }

  template <typename V>
  void values(std::span<const V> vs) {
    for (V v : vs) value(v);
  }

  void text(std::string_view s) {
    value(static_cast<uint64_t>(s.size()));
    bytes(s.data(), s.size());
  }

  uint64_t digest() const { return state_; }

 private:
  uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace cwic

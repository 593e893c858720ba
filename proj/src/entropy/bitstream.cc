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

#include "cwic/entropy/bitstream.h"

#include <algorithm>
#include <string>

#include "cwic/errors.h"

namespace cwic {

namespace {

template <typename U>
void put(std::vector<uint8_t>& out, U v) {
  for (int shift = 8 * (static_cast<int>(sizeof(U)) - 1); shift >= 0; shift -= 8)
    out.push_back(static_cast<uint8_t>(v >> shift));
}

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  template <typename U>
  U get(const char* field) {
    need(sizeof(U), field);
    U v = 0;
    for (size_t i = 0; i < sizeof(U); ++i) v = static_cast<U>((v << 8) | bytes_[pos_++]);
    return v;
  }

  std::vector<uint8_t> take(size_t n, const char* field) {
    need(n, field);
    std::vector<uint8_t> out(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                             bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return out;
  }

  size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(size_t n, const char* field) {
    if (remaining() < n) throw DecodeError(std::string("bitstream truncated in ") + field);
  }

  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
};

uint32_t round_up(uint32_t v, uint32_t m) { return (v + m - 1) / m * m; }

}  // namespace

std::vector<uint8_t> serialize(const CodecBitstream& stream) {
  const StreamHeader& h = stream.header;
  std::vector<uint8_t> out(kStreamMagic.begin(), kStreamMagic.end());
  put<uint8_t>(out, kStreamVersion);
  put<uint32_t>(out, h.width);
  put<uint32_t>(out, h.height);
  put<uint32_t>(out, h.padded_width);
  put<uint32_t>(out, h.padded_height);
  put<uint64_t>(out, h.model_hash);
  put<uint8_t>(out, h.lambda_index);
  put<uint32_t>(out, static_cast<uint32_t>(stream.z_bytes.size()));
  out.insert(out.end(), stream.z_bytes.begin(), stream.z_bytes.end());
  put<uint32_t>(out, static_cast<uint32_t>(stream.y_bytes.size()));
  out.insert(out.end(), stream.y_bytes.begin(), stream.y_bytes.end());
  return out;
}

CodecBitstream parse_bitstream(std::span<const uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.take(kStreamMagic.size(), "magic");
  if (!std::equal(magic.begin(), magic.end(), kStreamMagic.begin())) throw DecodeError("not a cwic bitstream");
  const auto version = r.get<uint8_t>("version");
  if (version != kStreamVersion)
    throw DecodeError("unsupported bitstream version " + std::to_string(version));
  CodecBitstream s;
  StreamHeader& h = s.header;
  h.width = r.get<uint32_t>("width");
  h.height = r.get<uint32_t>("height");
  h.padded_width = r.get<uint32_t>("padded width");
  h.padded_height = r.get<uint32_t>("padded height");
  h.model_hash = r.get<uint64_t>("model hash");
  h.lambda_index = r.get<uint8_t>("lambda index");
  if (h.width == 0 || h.height == 0 || h.width > (1u << 20) || h.height > (1u << 20) ||
      h.padded_width != round_up(h.width, 64) || h.padded_height != round_up(h.height, 64))
    throw DecodeError("bitstream header has inconsistent dimensions");
  s.z_bytes = r.take(r.get<uint32_t>("z length"), "z payload");
  s.y_bytes = r.take(r.get<uint32_t>("y length"), "y payload");
  if (r.remaining() != 0) throw DecodeError("trailing bytes after bitstream");
  return s;
}

}  // namespace cwic

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

#include "cwic/train/checkpoint.h"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "cwic/errors.h"
#include "cwic/tensor/hash.h"

namespace cwic {

namespace {

class Writer {
 public:
  template <typename V>
  void put(V v) {
    unsigned char raw[sizeof(V)];
    std::memcpy(raw, &v, sizeof(V));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(V));
    out.insert(out.end(), raw, raw + sizeof(V));
  }

  template <typename V>
  void put_all(std::span<const V> vs) {
    for (V v : vs) put(v);
  }

  std::vector<uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> b) : b_(b) {}

  template <typename V>
  V get() {
    if (b_.size() - pos_ < sizeof(V)) throw FormatError("checkpoint truncated");
    unsigned char raw[sizeof(V)];
    std::memcpy(raw, b_.data() + pos_, sizeof(V));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(V));
    pos_ += sizeof(V);
    V v;
    std::memcpy(&v, raw, sizeof(V));
    return v;
  }

  template <typename V>
  void get_all(std::span<V> vs) {
    if ((b_.size() - pos_) / sizeof(V) < vs.size()) throw FormatError("checkpoint truncated");
    for (V& v : vs) v = get<V>();
  }

  std::string text(size_t n) {
    if (b_.size() - pos_ < n) throw FormatError("checkpoint truncated");
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == b_.size(); }

 private:
  std::span<const uint8_t> b_;
  size_t pos_ = 0;
};

void put_config(Writer& w, const ModelConfig& c) {
  w.put<int64_t>(c.n);
  w.put<int64_t>(c.m);
  w.put<int64_t>(c.hyper);
  w.put<int32_t>(c.window);
  w.put<int32_t>(c.heads);
  w.put<double>(c.lambda);
  w.put<uint8_t>(c.metric == Metric::kMse ? 0 : 1);
  w.put<uint64_t>(c.seed);
  w.put<uint8_t>(c.use_cwam);
  w.put<uint8_t>(c.use_feature_coding);
  w.put<int32_t>(c.residual_blocks);
  w.put<int64_t>(c.feature_growth);
}

ModelConfig get_config(Reader& r) {
  ModelConfig c;
  c.n = r.get<int64_t>();
  c.m = r.get<int64_t>();
  c.hyper = r.get<int64_t>();
  c.window = r.get<int32_t>();
  c.heads = r.get<int32_t>();
  c.lambda = r.get<double>();
  const auto metric = r.get<uint8_t>();
  if (metric > 1) throw FormatError("checkpoint names an unknown metric");
  c.metric = metric == 0 ? Metric::kMse : Metric::kMsSsim;
  c.seed = r.get<uint64_t>();
  c.use_cwam = r.get<uint8_t>() != 0;
  c.use_feature_coding = r.get<uint8_t>() != 0;
  c.residual_blocks = r.get<int32_t>();
  c.feature_growth = r.get<int64_t>();
  // Bound the sizes before building anything from them.
  if (c.n <= 0 || c.m <= 0 || c.n > 4096 || c.m > 4096 || c.hyper < 0 || c.hyper > 4096 || c.residual_blocks > 64 ||
      c.feature_growth > 4096)
    throw FormatError("checkpoint config out of range");
  return c;
}

}  // namespace

template <typename T>
std::vector<uint8_t> checkpoint_bytes(CodecNet<T>& net, int64_t step, const AdamState<T>* adam) {
  Writer w;
  w.out.assign(kCheckpointMagic.begin(), kCheckpointMagic.end());
  w.put<uint32_t>(kCheckpointVersion);
  w.put<uint8_t>(sizeof(T));
  put_config(w, net.config);
  w.put<int64_t>(step);
  const auto params = net.parameters();
  w.put<uint32_t>(static_cast<uint32_t>(params.size()));
  net.visit([&](const std::string& name, Tensor<T>& t) {
    w.put<uint16_t>(static_cast<uint16_t>(name.size()));
    w.out.insert(w.out.end(), name.begin(), name.end());
    for (int i = 0; i < 4; ++i) w.put<int64_t>(t.shape().dims[static_cast<size_t>(i)]);
    w.put_all(t.data());
  });
  w.put<uint8_t>(adam != nullptr);
  if (adam) {
    if (adam->m.size() != params.size() || adam->v.size() != params.size())
      throw ContractError("optimizer state does not match the parameter list");
    w.put<int64_t>(adam->t);
    for (size_t i = 0; i < params.size(); ++i) {
      const auto n = static_cast<size_t>(params[i].numel());
      if (adam->m[i].size() != n || adam->v[i].size() != n)
        throw ContractError("optimizer state does not match the parameter list");
      w.put_all(std::span<const T>(adam->m[i]));
      w.put_all(std::span<const T>(adam->v[i]));
    }
  }
  Fnv1a h;
  h.bytes(w.out.data(), w.out.size());
  w.put<uint64_t>(h.digest());
  return std::move(w.out);
}

template <typename T>
Checkpoint<T> parse_checkpoint(std::span<const uint8_t> bytes) {
  if (bytes.size() < kCheckpointMagic.size() + 4 + 8 || !std::equal(kCheckpointMagic.begin(), kCheckpointMagic.end(), bytes.begin()))
    throw FormatError("not a cwic checkpoint");
  Reader r(bytes.subspan(kCheckpointMagic.size()));
  const auto version = r.get<uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  const auto body = bytes.first(bytes.size() - 8);
  Fnv1a h;
  h.bytes(body.data(), body.size());
  Reader tail(bytes.last(8));
  if (tail.get<uint64_t>() != h.digest()) throw FormatError("checkpoint checksum mismatch (file is corrupt)");

  Reader rb(body.subspan(kCheckpointMagic.size() + 4));
  const auto dtype = rb.get<uint8_t>();
  if (dtype != sizeof(T))
    throw FormatError("checkpoint stores " + std::to_string(dtype * 8) + "-bit values, expected " +
                      std::to_string(sizeof(T) * 8));
  const ModelConfig config = get_config(rb);
  Checkpoint<T> ck{[&] {
                     try {
                       return CodecNet<T>::create(config);
                     } catch (const ConfigError& e) {
                       throw FormatError(std::string("checkpoint config is invalid: ") + e.what());
                     }
                   }(),
                   0, std::nullopt};
  ck.step = rb.get<int64_t>();
  auto params = ck.net.parameters();
  if (rb.get<uint32_t>() != params.size()) throw FormatError("checkpoint tensor count does not match the architecture");
  ck.net.visit([&](const std::string& name, Tensor<T>& t) {
    const std::string stored = rb.text(rb.get<uint16_t>());
    if (stored != name) throw FormatError("checkpoint tensor '" + stored + "' where '" + name + "' was expected");
    for (int i = 0; i < 4; ++i)
      if (rb.get<int64_t>() != t.shape().dims[static_cast<size_t>(i)])
        throw FormatError("checkpoint tensor '" + name + "' has the wrong shape");
    rb.get_all(t.mutable_data());
  });
  const auto has_adam = rb.get<uint8_t>();
  if (has_adam > 1) throw FormatError("checkpoint optimizer flag is invalid");
  if (has_adam) {
    AdamState<T> st;
    st.t = rb.get<int64_t>();
    for (const auto& p : params) {
      st.m.emplace_back(static_cast<size_t>(p.numel()));
      st.v.emplace_back(static_cast<size_t>(p.numel()));
      rb.get_all(std::span<T>(st.m.back()));
      rb.get_all(std::span<T>(st.v.back()));
    }
    ck.adam = std::move(st);
  }
  if (!rb.done()) throw FormatError("trailing bytes in checkpoint");
  return ck;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, CodecNet<T>& net, int64_t step, const AdamState<T>* adam) {
  const auto bytes = checkpoint_bytes(net, step, adam);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IngestError("cannot write checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open checkpoint " + path.string());
  const std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint<T>(bytes);
}

#define CWIC_INSTANTIATE(T)                                                                                    \
  template std::vector<uint8_t> checkpoint_bytes(CodecNet<T>&, int64_t, const AdamState<T>*);                  \
  template Checkpoint<T> parse_checkpoint(std::span<const uint8_t>);                                           \
  template void save_checkpoint(const std::filesystem::path&, CodecNet<T>&, int64_t, const AdamState<T>*);     \
  template Checkpoint<T> load_checkpoint(const std::filesystem::path&);

CWIC_INSTANTIATE(float)
CWIC_INSTANTIATE(double)

}  // namespace cwic

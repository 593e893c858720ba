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

#include <functional>
#include <string>
#include <vector>

#include "cwic/tensor/rng.h"
#include "cwic/tensor/tensor.h"

namespace cwic {

// Called once per parameter with its dotted name ("ga.conv0.weight").
template <typename T>
using ParamVisitor = std::function<void(const std::string& name, Tensor<T>& param)>;

// Parameter with values drawn from U(-bound, bound).
template <typename T>
Tensor<T> uniform_parameter(Shape shape, double bound, Rng& rng) {
  std::vector<T> values(static_cast<size_t>(shape.numel()));
  for (auto& v : values) v = static_cast<T>(rng.uniform(-bound, bound));
  return Tensor<T>::parameter(shape, std::move(values));
}

template <typename T>
Tensor<T> constant_parameter(Shape shape, double value) {
  return Tensor<T>::parameter(shape, std::vector<T>(static_cast<size_t>(shape.numel()), static_cast<T>(value)));
}

inline std::string join_name(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

}  // namespace cwic

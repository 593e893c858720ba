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

#include "cwic/tensor/adam.h"

#include <cmath>

#include "cwic/errors.h"

namespace cwic {

template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state, double lr,
               const AdamOptions& options) {
  if (!(lr > 0.0)) throw ContractError("adam_step: learning rate must be positive");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(static_cast<size_t>(p.numel()), T(0));
      state.v.emplace_back(static_cast<size_t>(p.numel()), T(0));
    }
  }
  if (state.m.size() != params.size()) throw DimensionError("adam_step: state does not match parameters");
  for (size_t i = 0; i < params.size(); ++i) {
    if (static_cast<int64_t>(state.m[i].size()) != params[i].numel() ||
        static_cast<int64_t>(state.v[i].size()) != params[i].numel()) {
      throw DimensionError("adam_step: moment shape mismatch for parameter " + std::to_string(i));
    }
    if (!params[i].has_grad()) continue;
    for (T g : params[i].grad()) {
      if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient, step rejected");
    }
  }

  const int64_t t = state.t + 1;
  const double b1 = options.beta1, b2 = options.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (size_t i = 0; i < params.size(); ++i) {
    auto value = params[i].mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const bool has_grad = params[i].has_grad();
    const auto grad = params[i].grad();
    for (size_t j = 0; j < value.size(); ++j) {
      const double g = has_grad ? static_cast<double>(grad[j]) : 0.0;
      const double mj = b1 * m[j] + (1.0 - b1) * g;
      const double vj = b2 * v[j] + (1.0 - b2) * g * g;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = lr * (mj / c1) / (std::sqrt(vj / c2) + options.epsilon);
      value[j] = static_cast<T>(value[j] - update);
    }
  }
  state.t = t;
}

template <typename T>
Adam<T>::Adam(std::vector<Tensor<T>> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template void adam_step<float>(std::vector<Tensor<float>>&, AdamState<float>&, double, const AdamOptions&);
template void adam_step<double>(std::vector<Tensor<double>>&, AdamState<double>&, double,
                                const AdamOptions&);
template class Adam<float>;
template class Adam<double>;

}  // namespace cwic

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
#include <vector>

#include "cwic/tensor/tensor.h"

namespace cwic {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moments per parameter plus the step counter.
template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  int64_t t = 0;
};

// One bias-corrected Adam update over `params`, using their grad slots
// (a parameter with no grad counts as a zero gradient). On a non-finite
// gradient, throws NumericError and leaves parameters and state untouched.
template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state, double lr,
               const AdamOptions& options = {});

template <typename T>
class Adam {
 public:
  explicit Adam(std::vector<Tensor<T>> params, AdamOptions options = {});

  void step(double lr) { adam_step(params_, state_, lr, options_); }
  void zero_grad();

  const std::vector<Tensor<T>>& params() const { return params_; }
  AdamState<T>& state() { return state_; }
  const AdamState<T>& state() const { return state_; }

 private:
  std::vector<Tensor<T>> params_;
  AdamState<T> state_;
  AdamOptions options_;
};

}  // namespace cwic

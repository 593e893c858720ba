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

#include "cwic/tensor/tensor.h"

namespace cwic {

struct GradCheckResult {
  double max_rel_error = 0.0;
  int64_t elements = 0;
  // Elements whose difference quotient needed a smaller step, and those
  // left unchecked because every step down to min_step crossed a kink.
  int64_t refined = 0;
  int64_t skipped = 0;
  std::string worst;  // "input[i][j]: analytic=... numeric=..."
};

struct GradCheckOptions {
  double step = 1e-4;
  // Denominator floor for |a - n| / max(|a|, |n|, floor); keeps exactly-zero
  // gradients from dividing by round-off.
  double floor = 1e-6;
  // Raises the floor to this fraction of the largest analytic gradient.
  // Deep graphs carry round-off far above 1e-16 relative to the loss, which
  // swamps the finite difference of near-zero gradient entries.
  double relative_floor = 0.0;
  // When x +- step lands a piecewise op (abs, leaky_relu, clamp_min) on a
  // different branch than x, the step shrinks by 10x down to this bound.
  double min_step = 1e-7;
  // When > 0, only this many randomly chosen elements of each input are
  // probed (for checks through whole networks).
  int64_t max_per_input = 0;
  uint64_t sample_seed = 0;
};

// Compares backward() against central finite differences. `fn` maps the
// (leaf, requires-grad) inputs to a single-element loss. Only forward
// evaluations are used for the numeric side, each compared at a step where
// the function is smooth around the evaluation point.
GradCheckResult grad_check(
    const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& fn,
    std::vector<Tensor<double>> inputs, const GradCheckOptions& options = {});

}  // namespace cwic

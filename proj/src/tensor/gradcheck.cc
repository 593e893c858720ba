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

#include "cwic/tensor/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cwic/errors.h"
#include "cwic/tensor/rng.h"

namespace cwic {

GradCheckResult grad_check(
    const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& fn,
    std::vector<Tensor<double>> inputs, const GradCheckOptions& options) {
  for (auto& in : inputs) {
    if (!in.is_leaf()) throw ContractError("grad_check inputs must be leaves");
    in.set_requires_grad(true);
    in.zero_grad();
  }
  const Tensor<double> loss = fn(inputs);
  backward(loss);

  std::vector<std::vector<double>> analytic;
  for (const auto& in : inputs) {
    if (in.has_grad()) {
      analytic.emplace_back(in.grad().begin(), in.grad().end());
    } else {
      analytic.emplace_back(static_cast<size_t>(in.numel()), 0.0);
    }
  }

  double floor = options.floor;
  for (const auto& g : analytic)
    for (double v : g) floor = std::max(floor, options.relative_floor * std::abs(v));

  GradCheckResult result;
  NoGradGuard no_grad;
  auto traced = [&](uint64_t* sig) {
    BranchTrace trace;
    const double v = fn(inputs).item();
    *sig = trace.signature();
    return v;
  };
  uint64_t base_sig = 0;
  traced(&base_sig);
  for (size_t i = 0; i < inputs.size(); ++i) {
    auto values = inputs[i].mutable_data();
    std::vector<size_t> order(values.size());
    for (size_t j = 0; j < order.size(); ++j) order[j] = j;
    const auto limit = static_cast<size_t>(options.max_per_input);
    if (limit > 0 && order.size() > limit) {
      Rng rng(mix_seed(options.sample_seed, i));
      for (size_t k = 0; k < limit; ++k) std::swap(order[k], order[k + rng.below(order.size() - k)]);
      order.resize(limit);
      std::sort(order.begin(), order.end());
    }
    for (size_t j : order) {
      const double saved = values[j];
      bool smooth = false;
      double numeric = 0.0;
      for (double h = options.step; h >= options.min_step * (1 - 1e-9); h /= 10.0) {
        uint64_t sig_plus = 0, sig_minus = 0;
        values[j] = saved + h;
        const double plus = traced(&sig_plus);
        values[j] = saved - h;
        const double minus = traced(&sig_minus);
        values[j] = saved;
        if (sig_plus == base_sig && sig_minus == base_sig) {
          numeric = (plus - minus) / (2.0 * h);
          smooth = true;
          if (h != options.step) ++result.refined;
          break;
        }
      }
      if (!smooth) {
        ++result.skipped;
        continue;
      }
      const double a = analytic[i][j];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      const double err = std::abs(a - numeric) / denom;
      ++result.elements;
      if (err > result.max_rel_error || result.worst.empty()) {
        result.max_rel_error = std::max(result.max_rel_error, err);
        std::ostringstream os;
        os.precision(10);
        os << "input[" << i << "][" << j << "]: analytic=" << a << " numeric=" << numeric;
        result.worst = os.str();
      }
    }
  }
  for (auto& in : inputs) in.zero_grad();
  return result;
}

}  // namespace cwic

// Copyright 2026 The AVSOL Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "avsol/grad_check.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "avsol/rng.h"

namespace avsol {

GradCheckResult GradCheck(
    const std::function<Tensor(const std::vector<Tensor>&)>& fn,
    std::vector<Tensor> inputs, const GradCheckOptions& options) {
  for (Tensor& t : inputs) {
    if (!t.is_leaf() || !t.requires_grad()) {
      throw std::invalid_argument(
          "grad_check: inputs must be leaves that require grad");
    }
    t.ZeroGrad();
  }
  Backward(fn(inputs));
  std::vector<std::vector<double>> analytic;
  for (const Tensor& t : inputs) {
    auto g = t.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty()) analytic.back().assign(t.size(), 0.0);
  }

  Rng rng(options.seed, {0x67636b});
  GradCheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    std::vector<std::size_t> components(inputs[k].size());
    std::iota(components.begin(), components.end(), std::size_t{0});
    if (options.max_components_per_input > 0 &&
        components.size() > options.max_components_per_input) {
      rng.Shuffle(components.begin(), components.end());
      components.resize(options.max_components_per_input);
      std::sort(components.begin(), components.end());
    }
    auto values = inputs[k].mutable_data();
    for (std::size_t i : components) {
      const double saved = values[i];
      values[i] = saved + options.step;
      const double plus = fn(inputs).item();
      values[i] = saved - options.step;
      const double minus = fn(inputs).item();
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = analytic[k][i];
      const double err = std::abs(a - numeric) /
                         std::max({1.0, std::abs(a), std::abs(numeric)});
      ++result.components_checked;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_input = k;
        result.worst_component = i;
      }
    }
    inputs[k].ZeroGrad();
  }
  return result;
}

}  // namespace avsol

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

#ifndef AVSOL_GRAD_CHECK_H_
#define AVSOL_GRAD_CHECK_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "avsol/tensor.h"

namespace avsol {

struct GradCheckOptions {
  double step = 1e-5;
  // Probe at most this many components per input (chosen with `seed`);
  // 0 probes every component.
  std::size_t max_components_per_input = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_component = 0;
  std::size_t components_checked = 0;
};

// Compares the reverse-mode gradient of a scalar-valued function against
// central finite differences. The relative error of one component is
// |analytic - numeric| / max(1, |analytic|, |numeric|).
//
// `inputs` must be leaves with requires_grad set; their values are perturbed
// in place and restored. Their accumulated gradients are reset.
GradCheckResult GradCheck(
    const std::function<Tensor(const std::vector<Tensor>&)>& fn,
    std::vector<Tensor> inputs, const GradCheckOptions& options = {});

}  // namespace avsol

#endif  // AVSOL_GRAD_CHECK_H_

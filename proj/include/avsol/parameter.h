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

#ifndef AVSOL_PARAMETER_H_
#define AVSOL_PARAMETER_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "avsol/tensor.h"

namespace avsol {

// A trainable leaf tensor together with its Adam moment accumulators.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value);

  std::string name;
  Tensor value;                      // leaf, requires_grad
  std::vector<double> first_moment;  // same length as value
  std::vector<double> second_moment;
  std::int64_t steps = 0;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update of `param` with an explicit gradient.
void AdamStep(Parameter& param, std::span<const double> gradient,
              const AdamOptions& options);

// Updates every parameter from its accumulated gradient (a parameter that
// received no gradient is treated as having a zero gradient).
void AdamStep(std::span<Parameter* const> params, const AdamOptions& options);

void ZeroGrads(std::span<Parameter* const> params);

}  // namespace avsol

#endif  // AVSOL_PARAMETER_H_

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

#ifndef AVSOL_CHECKS_H_
#define AVSOL_CHECKS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "avsol/dnm.h"
#include "avsol/grad_check.h"

namespace avsol {

struct OpCheck {
  std::string op;
  double max_relative_error = 0.0;
  int draws = 0;
};

// Finite-difference check of every registered op, each wrapped in a random
// linear read-out so that upstream gradients are not all ones. Shapes and
// values are redrawn `draws` times from `seed`. Returned in registration
// order, one entry per op.
std::vector<OpCheck> CheckRegisteredOps(std::uint64_t seed, int draws);

// Finite-difference check of the multitask loss of a freshly initialised
// model on a random clip, with respect to every parameter.
// `components_per_parameter` = 0 probes all components.
GradCheckResult CheckModelLoss(const ModelConfig& config, std::uint64_t seed,
                               std::size_t components_per_parameter = 0);

}  // namespace avsol

#endif  // AVSOL_CHECKS_H_

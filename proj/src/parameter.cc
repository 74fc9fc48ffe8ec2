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

#include "avsol/parameter.h"

#include <cmath>
#include <utility>

#include "avsol/errors.h"

namespace avsol {

Parameter::Parameter(std::string param_name, Tensor param_value)
    : name(std::move(param_name)),
      value(param_value.Clone(/*requires_grad=*/true)),
      first_moment(param_value.size(), 0.0),
      second_moment(param_value.size(), 0.0) {}

void AdamStep(Parameter& param, std::span<const double> gradient,
              const AdamOptions& options) {
  const std::size_t n = param.value.size();
  if (gradient.size() != n || param.first_moment.size() != n ||
      param.second_moment.size() != n) {
    throw ShapeError("adam_step: parameter '" + param.name + "' has " +
                     std::to_string(n) + " values but gradient has " +
                     std::to_string(gradient.size()));
  }
  ++param.steps;
  const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(param.steps));
  const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(param.steps));
  auto w = param.value.mutable_data();
  for (std::size_t i = 0; i < n; ++i) {
    const double g = gradient[i];
    double& m = param.first_moment[i];
    double& v = param.second_moment[i];
    m = options.beta1 * m + (1.0 - options.beta1) * g;
    v = options.beta2 * v + (1.0 - options.beta2) * g * g;
    const double m_hat = m / c1;
    const double v_hat = v / c2;
    w[i] -= options.lr * m_hat / (std::sqrt(v_hat) + options.eps);
  }
}

void AdamStep(std::span<Parameter* const> params, const AdamOptions& options) {
  for (Parameter* p : params) {
    auto grad = p->value.grad();
    if (grad.empty()) {
      const std::vector<double> zeros(p->value.size(), 0.0);
      AdamStep(*p, zeros, options);
    } else {
      AdamStep(*p, grad, options);
    }
  }
}

void ZeroGrads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->value.ZeroGrad();
}

}  // namespace avsol

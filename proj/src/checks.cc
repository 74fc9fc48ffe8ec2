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

#include "avsol/checks.h"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>

#include "avsol/rng.h"
#include "avsol/train.h"

namespace avsol {

namespace {

using Fn = std::function<Tensor(const std::vector<Tensor>&)>;

struct Case {
  Fn fn;
  std::vector<Tensor> inputs;
};

Tensor RandomTensor(const Shape& shape, Rng& rng, double lo = -1.0,
                    double hi = 1.0, bool requires_grad = true) {
  std::vector<double> v(NumElements(shape));
  for (double& x : v) x = rng.Uniform(lo, hi);
  return Tensor(shape, std::move(v), requires_grad);
}

std::size_t Dim(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + rng.Index(hi - lo + 1);
}

Shape RandomShape(Rng& rng) {
  Shape s(Dim(rng, 1, 3));
  for (auto& d : s) d = Dim(rng, 1, 4);
  return s;
}

// Reduces an op output to a scalar through fixed random weights.
Fn ReadOut(std::function<Tensor(const std::vector<Tensor>&)> op, Rng& rng) {
  auto weights = std::make_shared<Tensor>();
  auto seed = rng.NextU64();
  return [op, weights, seed](const std::vector<Tensor>& in) {
    Tensor out = op(in);
    if (!weights->defined()) {
      Rng w(seed);
      *weights = RandomTensor(out.shape(), w, -1.0, 1.0, false);
    }
    return Sum(Mul(out, *weights));
  };
}

Case MakeCase(const std::string& op, Rng& rng) {
  Case c;
  auto unary = [&](std::function<Tensor(const Tensor&)> f) {
    c.inputs = {RandomTensor(RandomShape(rng), rng, -2.0, 2.0)};
    c.fn = ReadOut([f](const std::vector<Tensor>& in) { return f(in[0]); }, rng);
  };
  auto binary = [&](std::function<Tensor(const Tensor&, const Tensor&)> f) {
    const Shape s = RandomShape(rng);
    c.inputs = {RandomTensor(s, rng), RandomTensor(s, rng)};
    c.fn = ReadOut([f](const std::vector<Tensor>& in) { return f(in[0], in[1]); },
                   rng);
  };
  if (op == "add") {
    binary(Add);
  } else if (op == "sub") {
    binary(Sub);
  } else if (op == "mul") {
    binary(Mul);
  } else if (op == "scale") {
    const double factor = rng.Uniform(-2.0, 2.0);
    unary([factor](const Tensor& a) { return Scale(a, factor); });
  } else if (op == "matmul") {
    const std::size_t m = Dim(rng, 1, 4), k = Dim(rng, 1, 4), n = Dim(rng, 1, 4);
    c.inputs = {RandomTensor({m, k}, rng), RandomTensor({k, n}, rng)};
    c.fn = ReadOut([](const std::vector<Tensor>& in) { return MatMul(in[0], in[1]); },
                   rng);
  } else if (op == "sigmoid") {
    unary(Sigmoid);
  } else if (op == "tanh") {
    unary(Tanh);
  } else if (op == "softmax" || op == "mean") {
    Shape s = RandomShape(rng);
    const std::size_t axis = rng.Index(s.size());
    const bool softmax = op == "softmax";
    // A softmax over one element is constant.
    if (softmax) s[axis] = std::max<std::size_t>(s[axis], 2);
    unary([softmax, axis](const Tensor& a) {
      return softmax ? Softmax(a, axis) : Mean(a, axis);
    });
    c.inputs = {RandomTensor(s, rng, -2.0, 2.0)};
  } else if (op == "sum") {
    c.inputs = {RandomTensor(RandomShape(rng), rng)};
    c.fn = [](const std::vector<Tensor>& in) { return Scale(Sum(in[0]), 0.7); };
  } else if (op == "max_global") {
    // Well separated values keep the finite differences off the kink.
    const Shape s = RandomShape(rng);
    std::vector<double> v(NumElements(s));
    std::iota(v.begin(), v.end(), 0.0);
    rng.Shuffle(v.begin(), v.end());
    for (double& x : v) x = 0.1 * x + rng.Uniform(0.0, 0.01);
    c.inputs = {Tensor(s, std::move(v), true)};
    c.fn = [](const std::vector<Tensor>& in) { return Scale(MaxGlobal(in[0]), 1.3); };
  } else if (op == "dot_along_channel") {
    const std::size_t i = Dim(rng, 1, 6), d = Dim(rng, 1, 4);
    c.inputs = {RandomTensor({i, d}, rng), RandomTensor({d}, rng)};
    c.fn = ReadOut(
        [](const std::vector<Tensor>& in) { return DotAlongChannel(in[0], in[1]); },
        rng);
  } else if (op == "bce_loss" || op == "bce_with_logits") {
    const Shape s = RandomShape(rng);
    std::vector<double> t(NumElements(s));
    for (double& x : t) x = rng.Bernoulli(0.5) ? 1.0 : 0.0;
    Tensor target(s, std::move(t));
    if (op == "bce_loss") {
      c.inputs = {RandomTensor(s, rng, 0.05, 0.95)};
      c.fn = [target](const std::vector<Tensor>& in) { return BceLoss(in[0], target); };
    } else {
      c.inputs = {RandomTensor(s, rng, -3.0, 3.0)};
      c.fn = [target](const std::vector<Tensor>& in) {
        return BceWithLogits(in[0], target);
      };
    }
  } else if (op == "concat") {
    Shape s = RandomShape(rng);
    const std::size_t axis = rng.Index(s.size());
    const std::size_t parts = Dim(rng, 2, 3);
    for (std::size_t p = 0; p < parts; ++p) {
      s[axis] = Dim(rng, 1, 3);
      c.inputs.push_back(RandomTensor(s, rng));
    }
    c.fn = ReadOut([axis](const std::vector<Tensor>& in) { return Concat(in, axis); },
                   rng);
  } else if (op == "select") {
    Shape s = RandomShape(rng);
    if (s.size() < 2) s.push_back(Dim(rng, 1, 4));
    const std::size_t index = rng.Index(s[0]);
    c.inputs = {RandomTensor(s, rng)};
    c.fn = ReadOut([index](const std::vector<Tensor>& in) { return Select(in[0], index); },
                   rng);
  } else if (op == "reshape") {
    const Shape s = RandomShape(rng);
    c.inputs = {RandomTensor(s, rng)};
    const std::size_t n = NumElements(s);
    c.fn = ReadOut([n](const std::vector<Tensor>& in) { return Reshape(in[0], {n}); },
                   rng);
  } else if (op == "avg_pool") {
    const std::size_t fh = Dim(rng, 1, 3), fw = Dim(rng, 1, 3);
    c.inputs = {RandomTensor(
        {Dim(rng, 1, 2), fh * Dim(rng, 1, 2), fw * Dim(rng, 1, 2), Dim(rng, 1, 2)}, rng)};
    c.fn = ReadOut([fh, fw](const std::vector<Tensor>& in) { return AvgPool(in[0], fh, fw); },
                   rng);
  } else if (op == "conv2d") {
    const std::size_t ci = Dim(rng, 1, 2), co = Dim(rng, 1, 2);
    const std::size_t kh = 1 + 2 * rng.Index(2), kw = 1 + 2 * rng.Index(2);
    c.inputs = {RandomTensor({Dim(rng, 1, 4), Dim(rng, 1, 4), ci}, rng),
                RandomTensor({kh, kw, ci, co}, rng), RandomTensor({co}, rng)};
    c.fn = ReadOut(
        [](const std::vector<Tensor>& in) { return Conv2d(in[0], in[1], in[2]); }, rng);
  } else if (op == "conv3d") {
    const std::size_t ci = Dim(rng, 1, 2), co = Dim(rng, 1, 2);
    const std::size_t kt = 1 + 2 * rng.Index(2), k = 1 + 2 * rng.Index(2);
    c.inputs = {RandomTensor({Dim(rng, 1, 3), Dim(rng, 1, 3), Dim(rng, 1, 3), ci}, rng),
                RandomTensor({kt, k, k, ci, co}, rng), RandomTensor({co}, rng)};
    c.fn = ReadOut(
        [](const std::vector<Tensor>& in) { return Conv3d(in[0], in[1], in[2]); }, rng);
  } else {
    throw std::logic_error("no gradient check case for op '" + op + "'");
  }
  return c;
}

}  // namespace

std::vector<OpCheck> CheckRegisteredOps(std::uint64_t seed, int draws) {
  std::vector<OpCheck> out;
  for (const std::string& op : RegisteredOps()) {
    OpCheck check;
    check.op = op;
    for (int d = 0; d < draws; ++d) {
      Rng rng(seed, {std::hash<std::string>{}(op), static_cast<std::uint64_t>(d)});
      Case c = MakeCase(op, rng);
      GradCheckResult r = GradCheck(c.fn, c.inputs);
      check.max_relative_error = std::max(check.max_relative_error, r.max_relative_error);
      ++check.draws;
    }
    out.push_back(check);
  }
  return out;
}

GradCheckResult CheckModelLoss(const ModelConfig& config, std::uint64_t seed,
                               std::size_t components_per_parameter) {
  DnmModel model(config, seed);
  Rng rng(seed, {0x6d6f64656c});
  const Tensor clip = RandomTensor({static_cast<std::size_t>(config.steps),
                                    static_cast<std::size_t>(config.image_h),
                                    static_cast<std::size_t>(config.image_w), 1},
                                   rng, 0.0, 1.0, false);
  const Tensor logmel = RandomTensor({static_cast<std::size_t>(config.mel_bins),
                                      static_cast<std::size_t>(config.steps)},
                                     rng, 0.0, 1.0, false);
  std::vector<double> target(static_cast<std::size_t>(config.num_classes));
  for (double& t : target) t = rng.Bernoulli(0.5) ? 1.0 : 0.0;

  std::vector<Tensor> inputs;
  for (Parameter* p : model.parameters()) inputs.push_back(p->value);
  GradCheckOptions options;
  options.max_components_per_input = components_per_parameter;
  options.seed = seed;
  return GradCheck(
      [&](const std::vector<Tensor>&) {
        ModelOutput out = model.Forward(clip, logmel);
        return MultitaskLoss(out, 1, target, config.mode).total;
      },
      inputs, options);
}

}  // namespace avsol

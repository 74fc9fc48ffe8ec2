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

#include "avsol/tensor.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "avsol/errors.h"

namespace avsol {

std::size_t NumElements(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(std::shared_ptr<internal::Node> node) : node_(std::move(node)) {}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<internal::Node>()) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("Tensor: zero-sized dimension in " +
                                 ShapeToString(shape));
  }
  if (values.size() != NumElements(shape)) {
    throw ShapeError("Tensor: " + std::to_string(values.size()) +
                     " values for shape " + ShapeToString(shape));
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::Zeros(Shape shape, bool requires_grad) {
  return Full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::Full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = NumElements(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::Scalar(double value) { return Tensor({}, {value}); }

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("item: tensor of shape " + ShapeToString(shape()) +
                     " is not a scalar");
  }
  return node_->value[0];
}

void Tensor::ZeroGrad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

Tensor Tensor::Clone(bool requires_grad) const {
  return Tensor(shape(), node_->value, requires_grad);
}

Tensor MakeOpResult(std::string_view op, Shape shape, std::vector<double> value,
                    std::vector<Tensor> inputs,
                    std::function<void(internal::Node&)> backward) {
  for (double v : value) {
    if (!std::isfinite(v)) {
      throw InvariantError(std::string(op) + ": produced a non-finite value");
    }
  }
  auto node = std::make_shared<internal::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  node->is_leaf = false;
  const bool needs_grad = std::any_of(
      inputs.begin(), inputs.end(),
      [](const Tensor& t) { return t.defined() && t.requires_grad(); });
  if (needs_grad) {
    node->requires_grad = true;
    for (const Tensor& t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

const std::vector<std::string>& RegisteredOps() {
  static const std::vector<std::string> kOps = {
      "add",     "sub",         "mul",         "scale",
      "matmul",  "sigmoid",     "tanh",        "softmax",
      "mean",    "sum",         "max_global",  "dot_along_channel",
      "bce_loss", "bce_with_logits", "concat", "select",
      "reshape", "avg_pool",    "conv2d",      "conv3d"};
  return kOps;
}

namespace {

std::string g_corrupt_op;
double g_corrupt_factor = 1.0;

void RequireSameShape(std::string_view op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     ShapeToString(a.shape()) + " vs " +
                     ShapeToString(b.shape()));
  }
}

void RequireRank(std::string_view op, const Tensor& a, std::size_t rank,
                 std::string_view what) {
  if (!a.defined() || a.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + std::string(what) +
                     " must have rank " + std::to_string(rank) + ", got " +
                     (a.defined() ? ShapeToString(a.shape()) : "undefined"));
  }
}

// Input grad buffer, or nullptr when that input does not take gradients.
double* InputGrad(internal::Node& out, std::size_t k) {
  internal::Node& in = *out.inputs[k];
  return in.requires_grad ? in.Grad().data() : nullptr;
}

// Splits `shape` around `axis` into (outer, n, inner) extents.
struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit SplitAt(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template <typename F>
Tensor Unary(std::string_view op, const Tensor& a, F f,
             std::function<void(internal::Node&)> backward) {
  std::vector<double> out(a.size());
  auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return MakeOpResult(op, a.shape(), std::move(out), {a}, std::move(backward));
}

struct ConvGeometry {
  std::size_t t, h, w, ci, co, kt, kh, kw;
};

// Shared kernel for conv2d (t = kt = 1) and conv3d, channels last.
void ConvForward(const ConvGeometry& g, const double* x, const double* k,
                 const double* bias, double* out) {
  const long pt = static_cast<long>(g.kt / 2);
  const long ph = static_cast<long>(g.kh / 2);
  const long pw = static_cast<long>(g.kw / 2);
  for (std::size_t t = 0; t < g.t; ++t) {
    for (std::size_t y = 0; y < g.h; ++y) {
      for (std::size_t x0 = 0; x0 < g.w; ++x0) {
        double* o = out + ((t * g.h + y) * g.w + x0) * g.co;
        for (std::size_t c = 0; c < g.co; ++c) o[c] = bias ? bias[c] : 0.0;
        for (std::size_t dt = 0; dt < g.kt; ++dt) {
          const long it = static_cast<long>(t + dt) - pt;
          if (it < 0 || it >= static_cast<long>(g.t)) continue;
          for (std::size_t dy = 0; dy < g.kh; ++dy) {
            const long iy = static_cast<long>(y + dy) - ph;
            if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
            for (std::size_t dx = 0; dx < g.kw; ++dx) {
              const long ix = static_cast<long>(x0 + dx) - pw;
              if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
              const double* xi =
                  x + ((static_cast<std::size_t>(it) * g.h +
                        static_cast<std::size_t>(iy)) * g.w +
                       static_cast<std::size_t>(ix)) * g.ci;
              const double* kk = k + ((dt * g.kh + dy) * g.kw + dx) * g.ci * g.co;
              for (std::size_t c = 0; c < g.ci; ++c) {
                const double xv = xi[c];
                const double* kr = kk + c * g.co;
                for (std::size_t o2 = 0; o2 < g.co; ++o2) o[o2] += xv * kr[o2];
              }
            }
          }
        }
      }
    }
  }
}

void ConvBackward(const ConvGeometry& g, const double* x, const double* k,
                  const double* gout, double* gx, double* gk, double* gb) {
  const long pt = static_cast<long>(g.kt / 2);
  const long ph = static_cast<long>(g.kh / 2);
  const long pw = static_cast<long>(g.kw / 2);
  for (std::size_t t = 0; t < g.t; ++t) {
    for (std::size_t y = 0; y < g.h; ++y) {
      for (std::size_t x0 = 0; x0 < g.w; ++x0) {
        const double* go = gout + ((t * g.h + y) * g.w + x0) * g.co;
        if (gb) {
          for (std::size_t c = 0; c < g.co; ++c) gb[c] += go[c];
        }
        for (std::size_t dt = 0; dt < g.kt; ++dt) {
          const long it = static_cast<long>(t + dt) - pt;
          if (it < 0 || it >= static_cast<long>(g.t)) continue;
          for (std::size_t dy = 0; dy < g.kh; ++dy) {
            const long iy = static_cast<long>(y + dy) - ph;
            if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
            for (std::size_t dx = 0; dx < g.kw; ++dx) {
              const long ix = static_cast<long>(x0 + dx) - pw;
              if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
              const std::size_t xoff =
                  ((static_cast<std::size_t>(it) * g.h +
                    static_cast<std::size_t>(iy)) * g.w +
                   static_cast<std::size_t>(ix)) * g.ci;
              const std::size_t koff = ((dt * g.kh + dy) * g.kw + dx) * g.ci * g.co;
              for (std::size_t c = 0; c < g.ci; ++c) {
                const double* kr = k + koff + c * g.co;
                if (gx) {
                  double acc = 0.0;
                  for (std::size_t o2 = 0; o2 < g.co; ++o2) acc += kr[o2] * go[o2];
                  gx[xoff + c] += acc;
                }
                if (gk) {
                  const double xv = x[xoff + c];
                  double* gkr = gk + koff + c * g.co;
                  for (std::size_t o2 = 0; o2 < g.co; ++o2) gkr[o2] += xv * go[o2];
                }
              }
            }
          }
        }
      }
    }
  }
}

Tensor ConvImpl(std::string_view op, const Tensor& x, const Tensor& kernel,
                const Tensor& bias, const ConvGeometry& g, Shape out_shape) {
  for (std::size_t ks : {g.kt, g.kh, g.kw}) {
    if (ks % 2 == 0) {
      throw ShapeError(std::string(op) + ": kernel sizes must be odd, got " +
                       ShapeToString(kernel.shape()));
    }
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.co)) {
    throw ShapeError(std::string(op) + ": bias shape " +
                     ShapeToString(bias.shape()) + " does not match " +
                     std::to_string(g.co) + " output channels");
  }
  std::vector<double> out(NumElements(out_shape));
  ConvForward(g, x.data().data(), kernel.data().data(),
              bias.defined() ? bias.data().data() : nullptr, out.data());
  std::vector<Tensor> inputs = {x, kernel};
  if (bias.defined()) inputs.push_back(bias);
  const bool has_bias = bias.defined();
  return MakeOpResult(
      op, std::move(out_shape), std::move(out), std::move(inputs),
      [g, has_bias](internal::Node& self) {
        const internal::Node& xn = *self.inputs[0];
        const internal::Node& kn = *self.inputs[1];
        ConvBackward(g, xn.value.data(), kn.value.data(), self.grad.data(),
                     InputGrad(self, 0), InputGrad(self, 1),
                     has_bias ? InputGrad(self, 2) : nullptr);
      });
}

}  // namespace

Tensor Add(const Tensor& a, const Tensor& b) {
  RequireSameShape("add", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return MakeOpResult("add", a.shape(), std::move(out), {a, b},
                      [](internal::Node& self) {
                        for (std::size_t k = 0; k < 2; ++k) {
                          if (double* g = InputGrad(self, k)) {
                            for (std::size_t i = 0; i < self.grad.size(); ++i)
                              g[i] += self.grad[i];
                          }
                        }
                      });
}

Tensor Sub(const Tensor& a, const Tensor& b) {
  RequireSameShape("sub", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return MakeOpResult("sub", a.shape(), std::move(out), {a, b},
                      [](internal::Node& self) {
                        if (double* g = InputGrad(self, 0)) {
                          for (std::size_t i = 0; i < self.grad.size(); ++i)
                            g[i] += self.grad[i];
                        }
                        if (double* g = InputGrad(self, 1)) {
                          for (std::size_t i = 0; i < self.grad.size(); ++i)
                            g[i] -= self.grad[i];
                        }
                      });
}

Tensor Mul(const Tensor& a, const Tensor& b) {
  RequireSameShape("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return MakeOpResult("mul", a.shape(), std::move(out), {a, b},
                      [](internal::Node& self) {
                        const auto& av = self.inputs[0]->value;
                        const auto& bv = self.inputs[1]->value;
                        if (double* g = InputGrad(self, 0)) {
                          for (std::size_t i = 0; i < self.grad.size(); ++i)
                            g[i] += self.grad[i] * bv[i];
                        }
                        if (double* g = InputGrad(self, 1)) {
                          for (std::size_t i = 0; i < self.grad.size(); ++i)
                            g[i] += self.grad[i] * av[i];
                        }
                      });
}

Tensor Scale(const Tensor& a, double factor) {
  return Unary(
      "scale", a, [factor](double v) { return v * factor; },
      [factor](internal::Node& self) {
        double* g = InputGrad(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          g[i] += factor * self.grad[i];
      });
}

Tensor MatMul(const Tensor& a, const Tensor& b) {
  RequireRank("matmul", a, 2, "lhs");
  RequireRank("matmul", b, 2, "rhs");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions differ " +
                     ShapeToString(a.shape()) + " x " +
                     ShapeToString(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double x = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += x * bv[p * n + j];
    }
  }
  return MakeOpResult(
      "matmul", {m, n}, std::move(out), {a, b},
      [m, k, n](internal::Node& self) {
        const auto& av = self.inputs[0]->value;
        const auto& bv = self.inputs[1]->value;
        const auto& go = self.grad;
        if (double* ga = InputGrad(self, 0)) {
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j)
                acc += go[i * n + j] * bv[p * n + j];
              ga[i * k + p] += acc;
            }
        }
        if (double* gb = InputGrad(self, 1)) {
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              const double x = av[i * k + p];
              for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += x * go[i * n + j];
            }
        }
      });
}

Tensor Sigmoid(const Tensor& a) {
  return Unary(
      "sigmoid", a,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](internal::Node& self) {
        double* g = InputGrad(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          const double y = self.value[i];
          g[i] += self.grad[i] * y * (1.0 - y);
        }
      });
}

Tensor Tanh(const Tensor& a) {
  return Unary(
      "tanh", a, [](double v) { return std::tanh(v); },
      [](internal::Node& self) {
        double* g = InputGrad(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          const double y = self.value[i];
          g[i] += self.grad[i] * (1.0 - y * y);
        }
      });
}

Tensor Softmax(const Tensor& a, std::size_t axis) {
  if (axis >= a.rank()) {
    throw ShapeError("softmax: axis " + std::to_string(axis) +
                     " out of range for shape " + ShapeToString(a.shape()));
  }
  const AxisSplit s = SplitAt(a.shape(), axis);
  std::vector<double> out(a.size());
  auto in = a.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t r = 0; r < s.inner; ++r) {
      const std::size_t base = o * s.n * s.inner + r;
      double mx = in[base];
      for (std::size_t j = 1; j < s.n; ++j) mx = std::max(mx, in[base + j * s.inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < s.n; ++j) {
        const double e = std::exp(in[base + j * s.inner] - mx);
        out[base + j * s.inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < s.n; ++j) out[base + j * s.inner] /= z;
    }
  }
  return MakeOpResult("softmax", a.shape(), std::move(out), {a},
                      [s](internal::Node& self) {
                        double* g = InputGrad(self, 0);
                        const auto& y = self.value;
                        const auto& go = self.grad;
                        for (std::size_t o = 0; o < s.outer; ++o) {
                          for (std::size_t r = 0; r < s.inner; ++r) {
                            const std::size_t base = o * s.n * s.inner + r;
                            double dot = 0.0;
                            for (std::size_t j = 0; j < s.n; ++j) {
                              const std::size_t idx = base + j * s.inner;
                              dot += go[idx] * y[idx];
                            }
                            for (std::size_t j = 0; j < s.n; ++j) {
                              const std::size_t idx = base + j * s.inner;
                              g[idx] += y[idx] * (go[idx] - dot);
                            }
                          }
                        }
                      });
}

Tensor Mean(const Tensor& a, std::size_t axis) {
  if (axis >= a.rank()) {
    throw ShapeError("mean: axis " + std::to_string(axis) +
                     " out of range for shape " + ShapeToString(a.shape()));
  }
  const AxisSplit s = SplitAt(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape.erase(out_shape.begin() + static_cast<long>(axis));
  std::vector<double> out(s.outer * s.inner, 0.0);
  auto in = a.data();
  const double inv = 1.0 / static_cast<double>(s.n);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t j = 0; j < s.n; ++j)
      for (std::size_t r = 0; r < s.inner; ++r)
        out[o * s.inner + r] += in[(o * s.n + j) * s.inner + r];
  for (double& v : out) v *= inv;
  return MakeOpResult("mean", std::move(out_shape), std::move(out), {a},
                      [s, inv](internal::Node& self) {
                        double* g = InputGrad(self, 0);
                        for (std::size_t o = 0; o < s.outer; ++o)
                          for (std::size_t j = 0; j < s.n; ++j)
                            for (std::size_t r = 0; r < s.inner; ++r)
                              g[(o * s.n + j) * s.inner + r] +=
                                  self.grad[o * s.inner + r] * inv;
                      });
}

Tensor Sum(const Tensor& a) {
  auto in = a.data();
  const double total = std::accumulate(in.begin(), in.end(), 0.0);
  return MakeOpResult("sum", {}, {total}, {a}, [](internal::Node& self) {
    double* g = InputGrad(self, 0);
    const std::size_t n = self.inputs[0]->value.size();
    for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
  });
}

Tensor MaxGlobal(const Tensor& a) {
  auto in = a.data();
  const std::size_t idx = static_cast<std::size_t>(
      std::max_element(in.begin(), in.end()) - in.begin());
  return MakeOpResult("max_global", {}, {in[idx]}, {a},
                      [idx](internal::Node& self) {
                        InputGrad(self, 0)[idx] += self.grad[0];
                      });
}

Tensor DotAlongChannel(const Tensor& v, const Tensor& a) {
  RequireRank("dot_along_channel", v, 2, "cell features");
  RequireRank("dot_along_channel", a, 1, "channel vector");
  const std::size_t cells = v.dim(0), d = v.dim(1);
  if (a.dim(0) != d) {
    throw ShapeError("dot_along_channel: channel mismatch " +
                     ShapeToString(v.shape()) + " vs " +
                     ShapeToString(a.shape()));
  }
  std::vector<double> out(cells, 0.0);
  for (std::size_t i = 0; i < cells; ++i)
    for (std::size_t c = 0; c < d; ++c) out[i] += v[i * d + c] * a[c];
  return MakeOpResult("dot_along_channel", {cells}, std::move(out), {v, a},
                      [cells, d](internal::Node& self) {
                        const auto& vv = self.inputs[0]->value;
                        const auto& av = self.inputs[1]->value;
                        if (double* gv = InputGrad(self, 0)) {
                          for (std::size_t i = 0; i < cells; ++i)
                            for (std::size_t c = 0; c < d; ++c)
                              gv[i * d + c] += self.grad[i] * av[c];
                        }
                        if (double* ga = InputGrad(self, 1)) {
                          for (std::size_t i = 0; i < cells; ++i)
                            for (std::size_t c = 0; c < d; ++c)
                              ga[c] += self.grad[i] * vv[i * d + c];
                        }
                      });
}

namespace {

void RequireBinaryTarget(std::string_view op, const Tensor& target) {
  if (target.requires_grad()) {
    throw std::invalid_argument(std::string(op) +
                                ": target must be a constant tensor");
  }
  for (double t : target.data()) {
    if (t != 0.0 && t != 1.0) {
      throw std::invalid_argument(std::string(op) +
                                  ": target values must be 0 or 1");
    }
  }
}

}  // namespace

Tensor BceLoss(const Tensor& prediction, const Tensor& target) {
  RequireSameShape("bce_loss", prediction, target);
  RequireBinaryTarget("bce_loss", target);
  double total = 0.0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double p = prediction[i];
    if (!(p > 0.0 && p < 1.0)) {
      throw std::domain_error("bce_loss: prediction " + std::to_string(p) +
                              " outside (0, 1)");
    }
    total -= target[i] * std::log(p) + (1.0 - target[i]) * std::log1p(-p);
  }
  return MakeOpResult("bce_loss", {}, {total}, {prediction, target},
                      [](internal::Node& self) {
                        double* g = InputGrad(self, 0);
                        const auto& p = self.inputs[0]->value;
                        const auto& t = self.inputs[1]->value;
                        for (std::size_t i = 0; i < p.size(); ++i)
                          g[i] += self.grad[0] *
                                  ((1.0 - t[i]) / (1.0 - p[i]) - t[i] / p[i]);
                      });
}

Tensor BceWithLogits(const Tensor& logits, const Tensor& target) {
  RequireSameShape("bce_with_logits", logits, target);
  RequireBinaryTarget("bce_with_logits", target);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double x = logits[i];
    total += std::max(x, 0.0) - target[i] * x + std::log1p(std::exp(-std::abs(x)));
  }
  return MakeOpResult("bce_with_logits", {}, {total}, {logits, target},
                      [](internal::Node& self) {
                        double* g = InputGrad(self, 0);
                        const auto& x = self.inputs[0]->value;
                        const auto& t = self.inputs[1]->value;
                        for (std::size_t i = 0; i < x.size(); ++i) {
                          const double p =
                              x[i] >= 0 ? 1.0 / (1.0 + std::exp(-x[i]))
                                        : std::exp(x[i]) / (1.0 + std::exp(x[i]));
                          g[i] += self.grad[0] * (p - t[i]);
                        }
                      });
}

Tensor Concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) {
    throw ShapeError("concat: axis " + std::to_string(axis) +
                     " out of range for shape " + ShapeToString(first));
  }
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> extents;
  for (const Tensor& p : parts) {
    Shape s = p.shape();
    if (s.size() != first.size()) {
      throw ShapeError("concat: rank mismatch " + ShapeToString(first) +
                       " vs " + ShapeToString(s));
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) {
        throw ShapeError("concat: shape mismatch " + ShapeToString(first) +
                         " vs " + ShapeToString(s));
      }
    }
    out_shape[axis] += s[axis];
    extents.push_back(s[axis]);
  }
  const AxisSplit s = SplitAt(out_shape, axis);
  std::vector<double> out(NumElements(out_shape));
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const std::size_t chunk = extents[p] * s.inner;
    auto in = parts[p].data();
    for (std::size_t o = 0; o < s.outer; ++o)
      std::copy_n(in.begin() + static_cast<long>(o * chunk), chunk,
                  out.begin() + static_cast<long>(o * s.n * s.inner + offset));
    offset += chunk;
  }
  return MakeOpResult("concat", out_shape, std::move(out), parts,
                      [s, extents](internal::Node& self) {
                        std::size_t offset = 0;
                        for (std::size_t p = 0; p < extents.size(); ++p) {
                          const std::size_t chunk = extents[p] * s.inner;
                          if (double* g = InputGrad(self, p)) {
                            for (std::size_t o = 0; o < s.outer; ++o)
                              for (std::size_t i = 0; i < chunk; ++i)
                                g[o * chunk + i] +=
                                    self.grad[o * s.n * s.inner + offset + i];
                          }
                          offset += chunk;
                        }
                      });
}

Tensor Select(const Tensor& a, std::size_t index) {
  if (a.rank() == 0 || index >= a.dim(0)) {
    throw ShapeError("select: index " + std::to_string(index) +
                     " out of range for shape " + ShapeToString(a.shape()));
  }
  Shape out_shape(a.shape().begin() + 1, a.shape().end());
  const std::size_t block = NumElements(out_shape);
  auto in = a.data();
  std::vector<double> out(in.begin() + static_cast<long>(index * block),
                          in.begin() + static_cast<long>((index + 1) * block));
  return MakeOpResult("select", std::move(out_shape), std::move(out), {a},
                      [index, block](internal::Node& self) {
                        double* g = InputGrad(self, 0) + index * block;
                        for (std::size_t i = 0; i < block; ++i)
                          g[i] += self.grad[i];
                      });
}

Tensor Reshape(const Tensor& a, Shape shape) {
  if (NumElements(shape) != a.size()) {
    throw ShapeError("reshape: cannot view " + ShapeToString(a.shape()) +
                     " as " + ShapeToString(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return MakeOpResult("reshape", std::move(shape), std::move(out), {a},
                      [](internal::Node& self) {
                        double* g = InputGrad(self, 0);
                        for (std::size_t i = 0; i < self.grad.size(); ++i)
                          g[i] += self.grad[i];
                      });
}

Tensor AvgPool(const Tensor& a, std::size_t fh, std::size_t fw) {
  RequireRank("avg_pool", a, 4, "input");
  const std::size_t t = a.dim(0), h = a.dim(1), w = a.dim(2), c = a.dim(3);
  if (fh == 0 || fw == 0 || h % fh != 0 || w % fw != 0) {
    throw ShapeError("avg_pool: factors " + std::to_string(fh) + "x" +
                     std::to_string(fw) + " do not tile " +
                     ShapeToString(a.shape()));
  }
  const std::size_t oh = h / fh, ow = w / fw;
  const double inv = 1.0 / static_cast<double>(fh * fw);
  std::vector<double> out(t * oh * ow * c, 0.0);
  auto in = a.data();
  for (std::size_t ti = 0; ti < t; ++ti)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double* src = &in[((ti * h + y) * w + x) * c];
        double* dst = &out[((ti * oh + y / fh) * ow + x / fw) * c];
        for (std::size_t k = 0; k < c; ++k) dst[k] += src[k] * inv;
      }
  return MakeOpResult(
      "avg_pool", {t, oh, ow, c}, std::move(out), {a},
      [t, h, w, c, fh, fw, oh, ow, inv](internal::Node& self) {
        double* g = InputGrad(self, 0);
        for (std::size_t ti = 0; ti < t; ++ti)
          for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
              const double* src =
                  &self.grad[((ti * oh + y / fh) * ow + x / fw) * c];
              double* dst = g + ((ti * h + y) * w + x) * c;
              for (std::size_t k = 0; k < c; ++k) dst[k] += src[k] * inv;
            }
      });
}

Tensor Conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  RequireRank("conv2d", x, 3, "input");
  RequireRank("conv2d", kernel, 4, "kernel");
  if (kernel.dim(2) != x.dim(2)) {
    throw ShapeError("conv2d: input channels differ " +
                     ShapeToString(x.shape()) + " vs kernel " +
                     ShapeToString(kernel.shape()));
  }
  const ConvGeometry g{1,           x.dim(0),      x.dim(1),      x.dim(2),
                       kernel.dim(3), 1,           kernel.dim(0), kernel.dim(1)};
  return ConvImpl("conv2d", x, kernel, bias, g, {g.h, g.w, g.co});
}

Tensor Conv3d(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  RequireRank("conv3d", x, 4, "input");
  RequireRank("conv3d", kernel, 5, "kernel");
  if (kernel.dim(3) != x.dim(3)) {
    throw ShapeError("conv3d: input channels differ " +
                     ShapeToString(x.shape()) + " vs kernel " +
                     ShapeToString(kernel.shape()));
  }
  const ConvGeometry g{x.dim(0),      x.dim(1),      x.dim(2),
                       x.dim(3),      kernel.dim(4), kernel.dim(0),
                       kernel.dim(1), kernel.dim(2)};
  return ConvImpl("conv3d", x, kernel, bias, g, {g.t, g.h, g.w, g.co});
}

void Backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " +
                     (loss.defined() ? ShapeToString(loss.shape())
                                     : std::string("undefined")));
  }
  internal::Node* root = loss.node().get();
  if (root->consumed) {
    throw std::logic_error(
        "backward: graph already consumed; run a new forward pass first");
  }
  if (!root->requires_grad) {
    throw std::logic_error(
        "backward: loss is detached (no input requires grad)");
  }

  // Iterative post-order DFS gives a topological order.
  std::vector<internal::Node*> order;
  // Owns every visited node until the pass ends; releasing inputs below
  // would otherwise free nodes that are still waiting for their turn.
  std::vector<std::shared_ptr<internal::Node>> alive;
  std::unordered_set<internal::Node*> seen;
  std::vector<std::pair<internal::Node*, std::size_t>> stack = {{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      const auto& child = node->inputs[next++];
      if (child && child->requires_grad && seen.insert(child.get()).second) {
        alive.push_back(child);
        stack.emplace_back(child.get(), 0);
      }
      continue;
    }
    if (!node->is_leaf && !node->backward) {
      throw std::logic_error("backward: node '" + std::string(node->op) +
                             "' was already differentiated (detached graph)");
    }
    order.push_back(node);
    stack.pop_back();
  }

  for (internal::Node* node : order) {
    if (!node->is_leaf) node->grad.assign(node->value.size(), 0.0);
  }
  root->Grad()[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    internal::Node* node = *it;
    if (node->is_leaf) continue;
    if (!g_corrupt_op.empty() && node->op == g_corrupt_op) {
      std::vector<std::vector<double>> before;
      for (auto& in : node->inputs)
        before.push_back(in->requires_grad ? in->Grad() : std::vector<double>{});
      node->backward(*node);
      for (std::size_t k = 0; k < node->inputs.size(); ++k) {
        if (!node->inputs[k]->requires_grad) continue;
        auto& g = node->inputs[k]->grad;
        for (std::size_t i = 0; i < g.size(); ++i)
          g[i] = before[k][i] + g_corrupt_factor * (g[i] - before[k][i]);
      }
    } else {
      node->backward(*node);
    }
    node->backward = nullptr;
    node->inputs.clear();
  }
  root->consumed = true;
}

namespace testing_hooks {

void CorruptBackward(std::string op, double factor) {
  g_corrupt_op = std::move(op);
  g_corrupt_factor = factor;
}

}  // namespace testing_hooks

}  // namespace avsol

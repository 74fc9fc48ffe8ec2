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

#ifndef AVSOL_TENSOR_H_
#define AVSOL_TENSOR_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace avsol {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape& shape);
std::string ShapeToString(const Shape& shape);

namespace internal {

// One vertex of the differentiation graph. Leaves have no backward rule.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated on first use
  bool requires_grad = false;
  bool is_leaf = true;
  bool consumed = false;  // set on a loss node after Backward()
  std::string_view op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  std::vector<double>& Grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace internal

// Dense row-major tensor of doubles. Copies share the underlying storage and
// graph node, like a handle; use Clone() for a detached deep copy.
class Tensor {
 public:
  // Undefined handle; used for "no tensor" (e.g. an omitted bias).
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor Zeros(Shape shape, bool requires_grad = false);
  static Tensor Full(Shape shape, double value, bool requires_grad = false);
  static Tensor Scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->value.size(); }

  std::span<const double> data() const { return node_->value; }
  // Writes through to the node; only meaningful on leaves.
  std::span<double> mutable_data() { return node_->value; }
  // Empty span until a backward pass has reached this tensor.
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->Grad(); }

  double item() const;
  double operator[](std::size_t flat_index) const {
    return node_->value[flat_index];
  }

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->is_leaf; }
  std::string_view op() const { return node_->op; }

  void ZeroGrad();
  // New leaf holding a copy of the values, disconnected from any graph.
  Tensor Clone(bool requires_grad = false) const;

  const std::shared_ptr<internal::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<internal::Node> node);
  friend Tensor MakeOpResult(std::string_view op, Shape shape,
                             std::vector<double> value,
                             std::vector<Tensor> inputs,
                             std::function<void(internal::Node&)> backward);

  std::shared_ptr<internal::Node> node_;
};

// Records an op output. The backward rule receives the output node and must
// accumulate into the grads of those inputs that require grad. If no input
// requires grad the rule is dropped and the result is a constant.
Tensor MakeOpResult(std::string_view op, Shape shape, std::vector<double> value,
                    std::vector<Tensor> inputs,
                    std::function<void(internal::Node&)> backward);

// Names of every differentiable op, in registration order. Gradient checking
// must cover each entry.
const std::vector<std::string>& RegisteredOps();

// ---- Core ops. Shapes must match exactly; there is no broadcasting apart
// from the scalar arguments of Scale. ----

Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);  // Hadamard
Tensor Scale(const Tensor& a, double factor);
// [m,k] x [k,n] -> [m,n]
Tensor MatMul(const Tensor& a, const Tensor& b);
Tensor Sigmoid(const Tensor& a);
Tensor Tanh(const Tensor& a);
Tensor Softmax(const Tensor& a, std::size_t axis);
// Mean over one axis; the axis is removed from the shape.
Tensor Mean(const Tensor& a, std::size_t axis);
// Sum of all elements, returned as a rank-0 tensor.
Tensor Sum(const Tensor& a);
// Maximum over all elements, rank-0. The subgradient goes to the first
// maximal element in row-major order.
Tensor MaxGlobal(const Tensor& a);
// v: [I, D], a: [D] -> [I] with out[i] = <v[i,:], a>.
Tensor DotAlongChannel(const Tensor& v, const Tensor& a);
// Summed binary cross-entropy of probabilities against a constant target.
// Predictions must lie strictly inside (0, 1), targets in {0, 1}.
Tensor BceLoss(const Tensor& prediction, const Tensor& target);
// Same value as BceLoss(Sigmoid(logits), target), evaluated stably.
Tensor BceWithLogits(const Tensor& logits, const Tensor& target);
Tensor Concat(const std::vector<Tensor>& parts, std::size_t axis);
// Slice `index` along axis 0; the axis is removed.
Tensor Select(const Tensor& a, std::size_t index);
Tensor Reshape(const Tensor& a, Shape shape);
// [T,H,W,C] -> [T,H/fh,W/fw,C], non-overlapping average pooling.
Tensor AvgPool(const Tensor& a, std::size_t fh, std::size_t fw);
// Stride 1, zero 'same' padding, odd kernel sizes, channels last.
// x: [H,W,Cin], kernel: [kh,kw,Cin,Cout], bias: [Cout] or empty.
Tensor Conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias);
// x: [T,H,W,Cin], kernel: [kt,kh,kw,Cin,Cout], bias: [Cout] or empty.
Tensor Conv3d(const Tensor& x, const Tensor& kernel, const Tensor& bias);

// Runs reverse-mode differentiation from a scalar loss. Leaf gradients
// accumulate until ZeroGrad(). A loss can be differentiated once.
void Backward(const Tensor& loss);

namespace testing_hooks {
// Scales the input-gradient contribution of every node produced by `op` by
// `factor` during Backward(). Empty name disables. Test-only; not thread-safe.
void CorruptBackward(std::string op, double factor = 1.5);
}  // namespace testing_hooks

}  // namespace avsol

#endif  // AVSOL_TENSOR_H_

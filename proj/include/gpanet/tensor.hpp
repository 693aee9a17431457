// Copyright (c) 2026 The gpanet Authors. All Rights Reserved.
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

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "gpanet/errors.hpp"

namespace gpanet {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (const auto e : s) n *= e;
  return n;
}

std::string shape_str(const Shape& s);

enum class Mode { train, eval };

namespace detail {

/// One recorded operation (or leaf) in the computation graph. Values are
/// immutable once an op produced them; gradients accumulate during backward.
template <typename Real>
struct Node {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;  // empty until backward reaches this node
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;
  const char* op = "leaf";
  bool requires_grad = false;

  bool is_leaf() const { return inputs.empty() && !backward; }

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), Real(0));
  }
};

template <typename Real>
using NodePtr = std::shared_ptr<Node<Real>>;

inline bool& grad_enabled_flag() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

inline bool autograd_enabled() { return detail::grad_enabled_flag(); }

/// Disables graph recording for its scope. Forward passes made under the
/// guard produce leaf tensors, so eval-time pipelines carry no tape.
class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::grad_enabled_flag()) {
    detail::grad_enabled_flag() = false;
  }
  ~NoGradGuard() { detail::grad_enabled_flag() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// Dense row-major tensor handle. Copies are cheap (shared node). The value
/// of an op output is immutable; only leaf tensors (parameters, inputs) may
/// be rewritten in place via leaf_data().
template <typename Real>
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<Real> values, bool requires_grad = false) {
    if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
      throw ShapeError("tensor: shape " + shape_str(shape) + " expects " +
                       std::to_string(shape_numel(shape)) + " values, got " +
                       std::to_string(values.size()));
    }
    for (const auto e : shape) {
      if (e <= 0) throw ShapeError("tensor: nonpositive extent in " + shape_str(shape));
    }
    node_ = std::make_shared<detail::Node<Real>>();
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<Real>(static_cast<std::size_t>(n), Real(0)),
                  requires_grad);
  }

  static Tensor full(Shape shape, Real v, bool requires_grad = false) {
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<Real>(static_cast<std::size_t>(n), v),
                  requires_grad);
  }

  static Tensor scalar(Real v) { return Tensor({1}, {v}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  std::int64_t extent(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(node_->value.size()); }
  const std::vector<Real>& data() const { return node_->value; }
  bool requires_grad() const { return node_->requires_grad; }
  const char* op_name() const { return node_->op; }

  /// Mutable access to a leaf tensor's storage (parameter updates). Op
  /// outputs are immutable and refuse.
  std::vector<Real>& leaf_data() {
    if (!node_->is_leaf()) {
      throw Error(std::string("tensor: in-place writes are only allowed on leaves, not on '") +
                  node_->op + "' outputs");
    }
    return node_->value;
  }

  bool has_grad() const { return !node_->grad.empty(); }

  const std::vector<Real>& grad() const {
    if (node_->grad.empty()) {
      throw Error("tensor: no gradient present; run backward() on a scalar that depends on it");
    }
    return node_->grad;
  }

  void zero_grad() { node_->grad.clear(); }

  Real item() const {
    if (numel() != 1) {
      throw ShapeError("tensor: item() expects a scalar, got shape " + shape_str(shape()));
    }
    return node_->value[0];
  }

  /// Reverse-mode sweep from a scalar root. Visits reachable nodes in
  /// reverse topological order exactly once.
  void backward() const {
    if (numel() != 1) {
      throw NumericError("backward: root must be scalar, got shape " + shape_str(shape()));
    }
    using N = detail::Node<Real>;
    std::vector<N*> order;
    std::unordered_set<N*> seen;
    // Iterative post-order DFS.
    std::vector<std::pair<N*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->inputs.size()) {
        N* child = n->inputs[next].get();
        ++next;
        if (seen.insert(child).second) stack.emplace_back(child, 0);
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
    node_->ensure_grad();
    node_->grad[0] = Real(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      N* n = *it;
      if (n->backward && !n->grad.empty()) n->backward(*n);
    }
  }

  detail::NodePtr<Real> node_ptr() const { return node_; }

  static Tensor from_node(detail::NodePtr<Real> n) {
    Tensor t;
    t.node_ = std::move(n);
    return t;
  }

 private:
  detail::NodePtr<Real> node_;
};

namespace detail {

/// Builds an op output node. With autograd disabled or no input requiring
/// grad, the result is a plain leaf and the backward closure is dropped.
template <typename Real>
Tensor<Real> make_op(const char* op, Shape shape, std::vector<Real> value,
                     std::vector<NodePtr<Real>> inputs,
                     std::function<void(Node<Real>&)> backward) {
  auto node = std::make_shared<Node<Real>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs = false;
  if (grad_enabled_flag()) {
    for (const auto& in : inputs) needs = needs || in->requires_grad;
  }
  if (needs) {
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
    node->requires_grad = true;
    node->op = op;
  }
  return Tensor<Real>::from_node(std::move(node));
}

/// Accumulates `v` into input slot `idx` of node `self`, skipping inputs
/// that do not require grad.
template <typename Real>
std::vector<Real>* grad_sink(Node<Real>& self, std::size_t idx) {
  Node<Real>* in = self.inputs[idx].get();
  if (!in->requires_grad) return nullptr;
  in->ensure_grad();
  return &in->grad;
}

}  // namespace detail

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace gpanet

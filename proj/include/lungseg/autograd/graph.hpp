// Copyright (c) 2026 The lungseg Authors. All rights reserved.
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

#include <algorithm>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lungseg/core/tensor.hpp"

namespace lungseg::ag {

template <typename S>
struct Node {
  Tensor<S> value;
  Tensor<S> grad;
  bool has_grad = false;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<S>>> parents;
  std::function<void(Node<S>&)> backward_fn;

  void accumulate(const Tensor<S>& delta) {
    if (!has_grad) {
      grad = Tensor<S>(value.shape());
      has_grad = true;
    }
    grad.flat() += delta.flat();
  }
  void accumulate_flat(const typename Tensor<S>::ArrayType& delta) {
    if (!has_grad) {
      grad = Tensor<S>(value.shape());
      has_grad = true;
    }
    grad.flat() += delta;
  }
  const Tensor<S>& grad_or_zero() {
    if (!has_grad) {
      grad = Tensor<S>(value.shape());
      has_grad = true;
    }
    return grad;
  }
};

/// Handle to a node of the dynamically built computation graph. Copying a
/// Variable shares the node; graphs are freed when the last handle to their
/// sink drops.
template <typename S>
class Variable {
 public:
  using NodePtr = std::shared_ptr<Node<S>>;

  Variable() = default;
  explicit Variable(Tensor<S> value, bool requires_grad = false)
      : node_(std::make_shared<Node<S>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  /// Result node of an op. Parents and the backward closure are dropped when
  /// no parent requires gradients, so constant subgraphs cost nothing.
  static Variable from_op(Tensor<S> value, std::vector<Variable> parents,
                          std::function<void(Node<S>&)> backward_fn) {
    Variable v(std::move(value), /*requires_grad=*/false);
    bool needs = false;
    for (const auto& p : parents) needs = needs || p.requires_grad();
    if (needs) {
      v.node_->requires_grad = true;
      v.node_->backward_fn = std::move(backward_fn);
      v.node_->parents.reserve(parents.size());
      for (auto& p : parents) v.node_->parents.push_back(p.node_);
    }
    return v;
  }

  bool defined() const { return node_ != nullptr; }
  const Tensor<S>& value() const { return node_->value; }
  Tensor<S>& value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  const Tensor<S>& grad() const { return node_->grad_or_zero(); }
  void zero_grad() {
    node_->has_grad = false;
    node_->grad = Tensor<S>();
  }

  NodePtr node() const { return node_; }

  /// Reverse-mode sweep from a scalar. Gradients accumulate into every
  /// reachable node with requires_grad; leaves keep theirs until zero_grad.
  void backward() const {
    if (!node_->value.is_scalar())
      throw ContractError("backward() requires a scalar root, got " + shape().str());
    std::vector<Node<S>*> order = topo_order();
    node_->accumulate(Tensor<S>::scalar(S(1)));
    for (Node<S>* n : order) {
      if (n->backward_fn && n->has_grad) n->backward_fn(*n);
    }
  }

 private:
  std::vector<Node<S>*> topo_order() const {
    // Iterative postorder DFS; reversed, it is a valid topological order of
    // the consumer-before-input relation.
    std::vector<Node<S>*> order;
    std::unordered_set<Node<S>*> visited;
    struct Frame {
      Node<S>* n;
      std::size_t next_parent;
    };
    std::vector<Frame> stack;
    if (!node_->requires_grad) return order;
    stack.push_back({node_.get(), 0});
    visited.insert(node_.get());
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next_parent < f.n->parents.size()) {
        Node<S>* p = f.n->parents[f.next_parent++].get();
        if (p->requires_grad && !visited.count(p)) {
          visited.insert(p);
          stack.push_back({p, 0});
        }
      } else {
        order.push_back(f.n);
        stack.pop_back();
      }
    }
    std::reverse(order.begin(), order.end());
    return order;
  }

  NodePtr node_;
};

template <typename S>
Variable<S> constant(Tensor<S> t) {
  return Variable<S>(std::move(t), /*requires_grad=*/false);
}

template <typename S>
Variable<S> parameter(Tensor<S> t) {
  return Variable<S>(std::move(t), /*requires_grad=*/true);
}

}  // namespace lungseg::ag

// Copyright 2026 The cwic Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cwic/tensor/tensor.h"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "cwic/errors.h"

namespace cwic {

std::string Shape::str() const {
  std::ostringstream os;
  os << '[' << dims[0] << 'x' << dims[1] << 'x' << dims[2] << 'x' << dims[3] << ']';
  return os.str();
}

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

namespace {
thread_local BranchTrace* g_branch_trace = nullptr;
}  // namespace

BranchTrace::BranchTrace() : previous_(g_branch_trace) { g_branch_trace = this; }
BranchTrace::~BranchTrace() { g_branch_trace = previous_; }

uint64_t* detail::branch_signature() {
  return g_branch_trace ? &g_branch_trace->signature_ : nullptr;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : node_(std::make_shared<detail::Node<T>>()) {
  for (int64_t d : shape.dims) {
    if (d <= 0) throw DimensionError("tensor extents must be positive, got " + shape.str());
  }
  node_->shape = shape;
  node_->data.assign(static_cast<size_t>(shape.numel()), fill);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : node_(std::make_shared<detail::Node<T>>()) {
  for (int64_t d : shape.dims) {
    if (d <= 0) throw DimensionError("tensor extents must be positive, got " + shape.str());
  }
  if (static_cast<int64_t>(values.size()) != shape.numel()) {
    throw DimensionError("shape " + shape.str() + " needs " + std::to_string(shape.numel()) +
                         " values, got " + std::to_string(values.size()));
  }
  detail::check_finite<T>("tensor", values);
  node_->shape = shape;
  node_->data = std::move(values);
}

template <typename T>
Tensor<T> Tensor<T>::parameter(Shape shape, std::vector<T> values) {
  Tensor t(shape, std::move(values));
  t.node_->requires_grad = true;
  return t;
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  if (!node_->is_leaf()) {
    throw ContractError(std::string("cannot mutate the result of op '") + node_->op + "'");
  }
  return node_->data;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ContractError("item() needs a single-element tensor, got " + shape().str());
  return node_->data[0];
}

template <typename T>
T Tensor<T>::at(int64_t n, int64_t c, int64_t h, int64_t w) const {
  const Shape& s = node_->shape;
  return node_->data[static_cast<size_t>(((n * s.c() + c) * s.h() + h) * s.w() + w)];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool value) {
  if (!node_->is_leaf()) throw ContractError("requires_grad can only be set on leaves");
  node_->requires_grad = value;
  return *this;
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (node_) node_->grad.clear();
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  Tensor t;
  t.node_ = std::make_shared<detail::Node<T>>();
  t.node_->shape = node_->shape;
  t.node_->data = node_->data;
  return t;
}

namespace detail {

template <typename T>
void check_finite(const char* op, std::span<const T> values) {
  for (T v : values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite value produced by '") + op + "'");
    }
  }
}

template <typename T>
static Tensor<T> finish(const char* op, Shape shape, std::vector<T> data, bool needs_grad,
                        std::vector<std::shared_ptr<Node<T>>> inputs,
                        std::function<void(Node<T>&)> backward_fn) {
  check_finite<T>(op, data);
  auto node = std::make_shared<Node<T>>();
  node->shape = shape;
  node->data = std::move(data);
  node->op = op;
  if (needs_grad && grad_enabled()) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward_fn);
  }
  return Tensor<T>::from_node(std::move(node));
}

template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> data,
                      std::initializer_list<const Tensor<T>*> inputs,
                      std::function<void(Node<T>&)> backward_fn) {
  bool needs_grad = false;
  std::vector<std::shared_ptr<Node<T>>> nodes;
  for (const Tensor<T>* t : inputs) {
    if (t && t->defined()) {
      needs_grad = needs_grad || t->requires_grad();
      nodes.push_back(t->node());
    }
  }
  return finish<T>(op, shape, std::move(data), needs_grad, std::move(nodes), std::move(backward_fn));
}

template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> data,
                      const std::vector<Tensor<T>>& inputs,
                      std::function<void(Node<T>&)> backward_fn) {
  bool needs_grad = false;
  std::vector<std::shared_ptr<Node<T>>> nodes;
  for (const Tensor<T>& t : inputs) {
    needs_grad = needs_grad || t.requires_grad();
    nodes.push_back(t.node());
  }
  return finish<T>(op, shape, std::move(data), needs_grad, std::move(nodes), std::move(backward_fn));
}

}  // namespace detail

template <typename T>
void backward(const Tensor<T>& scalar_loss) {
  using NodeT = detail::Node<T>;
  if (!scalar_loss.defined() || scalar_loss.numel() != 1) {
    throw ContractError("backward() needs a single-element loss");
  }
  NodeT* root = scalar_loss.node().get();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<NodeT*> order;
  std::unordered_set<NodeT*> visited;
  std::vector<std::pair<NodeT*, size_t>> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      NodeT* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (NodeT* node : order) {
    if (!node->is_leaf()) node->grad.clear();
  }
  root->grad_buffer()[0] += T(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeT* node = *it;
    if (node->is_leaf() || node->grad.empty()) continue;
    node->backward(*node);
    for (const auto& input : node->inputs) {
      if (!input->requires_grad || input->grad.empty()) continue;
      for (T g : input->grad) {
        if (!std::isfinite(g)) {
          throw NumericError(std::string("non-finite gradient in backward of '") + node->op + "'");
        }
      }
    }
  }
}

template class Tensor<float>;
template class Tensor<double>;
template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);

namespace detail {
template void check_finite<float>(const char*, std::span<const float>);
template void check_finite<double>(const char*, std::span<const double>);
template Tensor<float> make_result<float>(const char*, Shape, std::vector<float>,
                                          std::initializer_list<const Tensor<float>*>,
                                          std::function<void(Node<float>&)>);
template Tensor<double> make_result<double>(const char*, Shape, std::vector<double>,
                                            std::initializer_list<const Tensor<double>*>,
                                            std::function<void(Node<double>&)>);
template Tensor<float> make_result<float>(const char*, Shape, std::vector<float>,
                                          const std::vector<Tensor<float>>&,
                                          std::function<void(Node<float>&)>);
template Tensor<double> make_result<double>(const char*, Shape, std::vector<double>,
                                            const std::vector<Tensor<double>>&,
                                            std::function<void(Node<double>&)>);
}  // namespace detail

}  // namespace cwic

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

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cwic {

// Extents of a 4-D tensor in NCHW order. Lower-rank data uses leading 1s,
// e.g. a vector of length k is {1, 1, 1, k} and a scalar is {1, 1, 1, 1}.
struct Shape {
  std::array<int64_t, 4> dims{1, 1, 1, 1};

  constexpr Shape() = default;
  constexpr Shape(int64_t n, int64_t c, int64_t h, int64_t w) : dims{n, c, h, w} {}

  constexpr int64_t operator[](int i) const { return dims[static_cast<size_t>(i)]; }
  constexpr int64_t n() const { return dims[0]; }
  constexpr int64_t c() const { return dims[1]; }
  constexpr int64_t h() const { return dims[2]; }
  constexpr int64_t w() const { return dims[3]; }
  constexpr int64_t numel() const { return dims[0] * dims[1] * dims[2] * dims[3]; }

  friend constexpr bool operator==(const Shape&, const Shape&) = default;

  std::string str() const;
};

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  bool is_leaf() const { return !backward; }
  // Returns the gradient buffer, allocating zeros on first use.
  T* grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad.data();
  }
};

}  // namespace detail

// Reference-counted handle to a dense NCHW array that can take part in
// reverse-mode differentiation. Copies share storage. Values are immutable
// once an op has produced them; only leaves (parameters, inputs) expose
// mutable storage, and only the grad slot changes during backward().
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using NodePtr = std::shared_ptr<detail::Node<T>>;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  static Tensor scalar(T value) { return Tensor(Shape{}, value); }
  // A leaf that accumulates gradients.
  static Tensor parameter(Shape shape, std::vector<T> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t numel() const { return node_->shape.numel(); }
  int64_t dim(int i) const { return node_->shape[i]; }

  std::span<const T> data() const& { return node_->data; }
  // A temporary's storage would dangle; bind the tensor to a name first.
  std::span<const T> data() const&& = delete;
  // Leaves only; throws ContractError for op results.
  std::span<T> mutable_data();
  T item() const;
  T at(int64_t n, int64_t c, int64_t h, int64_t w) const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  // Leaves only.
  Tensor& set_requires_grad(bool value);
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  void zero_grad();

  // Same values, cut from the graph.
  Tensor detach() const;
  const char* op() const { return node_->op; }
  bool is_leaf() const { return node_->is_leaf(); }

  const NodePtr& node() const { return node_; }
  static Tensor from_node(NodePtr node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  NodePtr node_;
};

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

class BranchTrace;
namespace detail {
uint64_t* branch_signature();
}  // namespace detail

// While alive, piecewise ops (abs, leaky_relu, clamp_min) fold which side
// of their kink every element falls on into signature(). Two evaluations
// with equal signatures took the same smooth branch everywhere.
class BranchTrace {
 public:
  BranchTrace();
  ~BranchTrace();
  BranchTrace(const BranchTrace&) = delete;
  BranchTrace& operator=(const BranchTrace&) = delete;

  uint64_t signature() const { return signature_; }

 private:
  friend uint64_t* detail::branch_signature();
  uint64_t signature_ = 0xcbf29ce484222325ull;
  BranchTrace* previous_;
};

// Populates .grad() on every reachable tensor that requires grad. Leaf
// gradients accumulate across calls; zero them explicitly between steps.
// Intermediate gradients are reset at the start of each call.
template <typename T>
void backward(const Tensor<T>& scalar_loss);

namespace detail {

// Builds an op result. Throws NumericError naming `op` when any value is
// non-finite. The backward closure is kept only when some input requires
// grad and recording is enabled.
template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> data,
                      std::initializer_list<const Tensor<T>*> inputs,
                      std::function<void(Node<T>&)> backward_fn);

template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> data,
                      const std::vector<Tensor<T>>& inputs,
                      std::function<void(Node<T>&)> backward_fn);

template <typename T>
void check_finite(const char* op, std::span<const T> values);

}  // namespace detail

}  // namespace cwic

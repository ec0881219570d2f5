// Copyright 2026 The dualsplat Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// Every value is a 2-D `Tensor` (rows x cols); scalars are 1x1. Operations
// record their parents and a closure that propagates the output gradient
// back into the parents. `backward(root)` performs a reverse topological
// sweep from a scalar root. Graph construction is single-threaded; a graph
// lives as long as any Tensor referencing its tail.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dualsplat {

using Real = double;

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  constexpr std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& shape);

// Accumulates `grad_out` into the gradient slots of an op's inputs. Slots of
// inputs that do not require gradients are empty spans.
using BackwardFn =
    std::function<void(std::span<const Real> grad_out, std::span<const std::span<Real>> grad_in)>;

namespace detail {
struct Node;
}

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<Real> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Real value, bool requires_grad = false);
  static Tensor scalar(Real value, bool requires_grad = false);

  // Builds a recorded op node. `backward` is only invoked when the output
  // received a gradient and at least one input requires one.
  static Tensor op(Shape shape, std::vector<Real> values, std::vector<Tensor> inputs,
                   BackwardFn backward);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rows() const { return shape().rows; }
  std::size_t cols() const { return shape().cols; }
  std::size_t size() const { return shape().size(); }

  std::span<const Real> values() const;
  // Direct mutation is reserved for leaves (parameters, inputs under test).
  std::span<Real> mutable_values();
  Real item() const;
  Real at(std::size_t r, std::size_t c) const { return values()[r * cols() + c]; }

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  // Zeros if nothing has been accumulated yet.
  std::vector<Real> grad_copy() const;
  std::span<const Real> grad() const;
  std::span<Real> mutable_grad();
  void zero_grad();

  // Value copy that is cut from the graph.
  Tensor detach() const;

  const std::string& name() const;
  void set_name(std::string name);

  // Identity of the underlying node (for maps keyed on parameters).
  const void* id() const { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend void backward(const Tensor& root);

  std::shared_ptr<detail::Node> node_;
};

// Sweeps gradients from a scalar root into every reachable tensor that
// requires them. Throws Error(kGraphError) on a non-scalar root or a cycle.
void backward(const Tensor& root);

// ---- elementwise -----------------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Real s);
Tensor add_scalar(const Tensor& a, Real s);
// a (N x C) + row (1 x C) broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& row);
// a (N x C) * col (N x 1) broadcast over columns.
Tensor mul_col(const Tensor& a, const Tensor& col);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
// Zero gradient outside [lo, hi].
Tensor clamp(const Tensor& a, Real lo, Real hi);
// Elementwise Huber: 0.5 r^2 for |r| <= delta, delta (|r| - delta/2) otherwise.
Tensor huber(const Tensor& r, Real delta);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// ---- reductions ------------------------------------------------------------
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Per-row L2 norm, N x 1. Gradient at a zero row is zero.
Tensor row_norm(const Tensor& a);

// ---- linear algebra --------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);
// x W + b with b a 1 x out row.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// ---- row-wise normalizations -----------------------------------------------
Tensor softmax_rows(const Tensor& a);
// Rows scaled to unit L2 norm. Throws Error(kDegenerateRotation) when a row
// norm is below 1e-12 (the only caller needing zero-row semantics is the
// quaternion path, where zero is a degenerate rotation).
Tensor normalize_rows(const Tensor& a);
// x / rms(x) * gain, gain 1 x C.
Tensor rms_norm(const Tensor& x, const Tensor& gain, Real eps = 1e-6);

// ---- structure -------------------------------------------------------------
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& a, Shape shape);
// out[i] = a[index[i]]; repeated indices accumulate in backward.
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index);
// Each row repeated `times` consecutively (row-major fan-out).
Tensor repeat_rows(const Tensor& a, std::size_t times);

// ---- attention -------------------------------------------------------------
// Full (unmasked) multi-head scaled dot-product attention. q, k, v: T x D with
// D divisible by `heads`.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads);

}  // namespace dualsplat

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

#include "dualsplat/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "dualsplat/error.hpp"

namespace dualsplat {

namespace detail {

struct Node {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
  std::string name;

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

namespace {

using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

[[noreturn]] void shape_error(const std::string& op, const Shape& a, const Shape& b) {
  throw Error(ErrorCode::kShapeError, op + ": " + to_string(a) + " vs " + to_string(b));
}

void require_same(const std::string& op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error(op, a.shape(), b.shape());
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  auto x = a.values();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  return Tensor::op(a.shape(), std::move(out), {a},
                    [a, deriv](std::span<const Real> g, std::span<const std::span<Real>> gi) {
                      auto x = a.values();
                      for (std::size_t i = 0; i < x.size(); ++i) gi[0][i] += g[i] * deriv(x[i]);
                    });
}

}  // namespace

std::string to_string(const Shape& shape) {
  return "[" + std::to_string(shape.rows) + "x" + std::to_string(shape.cols) + "]";
}

// ---- Tensor ----------------------------------------------------------------

Tensor::Tensor(Shape shape, std::vector<Real> values, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  if (values.size() != shape.size()) {
    throw Error(ErrorCode::kShapeError, "tensor data length " + std::to_string(values.size()) +
                                            " does not match " + to_string(shape));
  }
  node_->shape = shape;
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(shape, std::vector<Real>(shape.size(), 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, Real value, bool requires_grad) {
  return Tensor(shape, std::vector<Real>(shape.size(), value), requires_grad);
}

Tensor Tensor::scalar(Real value, bool requires_grad) {
  return Tensor({1, 1}, {value}, requires_grad);
}

Tensor Tensor::op(Shape shape, std::vector<Real> values, std::vector<Tensor> inputs,
                  BackwardFn backward) {
  Tensor out(shape, std::move(values), false);
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (any) {
    out.node_->requires_grad = true;
    out.node_->leaf = false;
    out.node_->parents.reserve(inputs.size());
    for (auto& in : inputs) out.node_->parents.push_back(in.node_);
    out.node_->backward = std::move(backward);
  }
  return out;
}

const Shape& Tensor::shape() const { return node_->shape; }
std::span<const Real> Tensor::values() const { return node_->value; }
std::span<Real> Tensor::mutable_values() { return node_->value; }

Real Tensor::item() const {
  if (size() != 1) throw Error(ErrorCode::kShapeError, "item() on " + to_string(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return node_->leaf; }
bool Tensor::has_grad() const { return !node_->grad.empty(); }

std::vector<Real> Tensor::grad_copy() const {
  if (node_->grad.empty()) return std::vector<Real>(size(), 0.0);
  return node_->grad;
}

std::span<const Real> Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

std::span<Real> Tensor::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->value, false); }

const std::string& Tensor::name() const { return node_->name; }
void Tensor::set_name(std::string name) { node_->name = std::move(name); }

// ---- backward --------------------------------------------------------------

void backward(const Tensor& root) {
  if (!root.defined() || root.size() != 1) {
    throw Error(ErrorCode::kGraphError, "backward requires a scalar root");
  }
  if (!root.requires_grad()) return;

  // Iterative DFS post-order; colors detect cycles.
  enum class Mark : std::uint8_t { kOpen, kDone };
  std::unordered_map<detail::Node*, Mark> marks;
  std::vector<detail::Node*> order;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.node_.get(), 0);
  marks[root.node_.get()] = Mark::kOpen;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (!parent->requires_grad) continue;
      auto it = marks.find(parent);
      if (it == marks.end()) {
        marks[parent] = Mark::kOpen;
        stack.emplace_back(parent, 0);
      } else if (it->second == Mark::kOpen) {
        throw Error(ErrorCode::kGraphError, "cycle detected in tape");
      }
    } else {
      marks[node] = Mark::kDone;
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node_->ensure_grad();
  root.node_->grad[0] += 1.0;
  std::vector<std::span<Real>> slots;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->leaf || node->grad.empty() || !node->backward) continue;
    slots.clear();
    for (auto& parent : node->parents) {
      if (parent->requires_grad) {
        parent->ensure_grad();
        slots.emplace_back(parent->grad);
      } else {
        slots.emplace_back();
      }
    }
    node->backward(node->grad, slots);
  }
}

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  auto x = a.values(), y = b.values();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return Tensor::op(a.shape(), std::move(out), {a, b},
                    [](std::span<const Real> g, std::span<const std::span<Real>> gi) {
                      for (int k = 0; k < 2; ++k) {
                        if (gi[k].empty()) continue;
                        for (std::size_t i = 0; i < g.size(); ++i) gi[k][i] += g[i];
                      }
                    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  auto x = a.values(), y = b.values();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return Tensor::op(a.shape(), std::move(out), {a, b},
                    [](std::span<const Real> g, std::span<const std::span<Real>> gi) {
                      if (!gi[0].empty())
                        for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
                      if (!gi[1].empty())
                        for (std::size_t i = 0; i < g.size(); ++i) gi[1][i] -= g[i];
                    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  auto x = a.values(), y = b.values();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return Tensor::op(a.shape(), std::move(out), {a, b},
                    [a, b](std::span<const Real> g, std::span<const std::span<Real>> gi) {
                      auto x = a.values(), y = b.values();
                      if (!gi[0].empty())
                        for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i] * y[i];
                      if (!gi[1].empty())
                        for (std::size_t i = 0; i < g.size(); ++i) gi[1][i] += g[i] * x[i];
                    });
}

Tensor scale(const Tensor& a, Real s) {
  return unary(a, [s](Real x) { return s * x; }, [s](Real) { return s; });
}

Tensor add_scalar(const Tensor& a, Real s) {
  return unary(a, [s](Real x) { return x + s; }, [](Real) { return 1.0; });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) shape_error("add_row", a.shape(), row.shape());
  const std::size_t n = a.rows(), c = a.cols();
  auto x = a.values(), r = row.values();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] + r[j];
  return Tensor::op(a.shape(), std::move(out), {a, row},
                    [n, c](std::span<const Real> g, std::span<const std::span<Real>> gi) {
                      if (!gi[0].empty())
                        for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
                      if (!gi[1].empty())
                        for (std::size_t i = 0; i < n; ++i)
                          for (std::size_t j = 0; j < c; ++j) gi[1][j] += g[i * c + j];
                    });
}

Tensor mul_col(const Tensor& a, const Tensor& col) {
  if (col.cols() != 1 || col.rows() != a.rows()) shape_error("mul_col", a.shape(), col.shape());
  const std::size_t n = a.rows(), c = a.cols();
  auto x = a.values(), w = col.values();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] * w[i];
  return Tensor::op(a.shape(), std::move(out), {a, col},
                    [a, col, n, c](std::span<const Real> g, std::span<const std::span<Real>> gi) {
                      auto x = a.values(), w = col.values();
                      for (std::size_t i = 0; i < n; ++i) {
                        for (std::size_t j = 0; j < c; ++j) {
                          if (!gi[0].empty()) gi[0][i * c + j] += g[i * c + j] * w[i];
                          if (!gi[1].empty()) gi[1][i] += g[i * c + j] * x[i * c + j];
                        }
                      }
                    });
}

Tensor exp(const Tensor& a) {
  return unary(a, [](Real x) { return std::exp(x); }, [](Real x) { return std::exp(x); });
}

Tensor log(const Tensor& a) {
  return unary(a, [](Real x) { return std::log(x); }, [](Real x) { return 1.0 / x; });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](Real x) { return std::tanh(x); },
               [](Real x) {
                 const Real t = std::tanh(x);
                 return 1.0 - t * t;
               });
}

namespace {
Real logistic(Real x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}
Real softplus_value(Real x) { return x > 30 ? x : std::log1p(std::exp(x)); }
}  // namespace

Tensor sigmoid(const Tensor& a) {
  return unary(a, logistic, [](Real x) {
    const Real s = logistic(x);
    return s * (1.0 - s);
  });
}

Tensor softplus(const Tensor& a) { return unary(a, softplus_value, logistic); }

Tensor gelu(const Tensor& a) {
  // tanh approximation
  constexpr Real k = 0.7978845608028654;  // sqrt(2/pi)
  constexpr Real c = 0.044715;
  return unary(
      a,
      [](Real x) { return 0.5 * x * (1.0 + std::tanh(k * (x + c * x * x * x))); },
      [](Real x) {
        const Real u = k * (x + c * x * x * x);
        const Real t = std::tanh(u);
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * c * x * x);
      });
}

Tensor abs(const Tensor& a) {
  return unary(a, [](Real x) { return std::abs(x); },
               [](Real x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& a) {
  return unary(a, [](Real x) { return x * x; }, [](Real x) { return 2.0 * x; });
}

Tensor clamp(const Tensor& a, Real lo, Real hi) {
  return unary(a, [lo, hi](Real x) { return std::clamp(x, lo, hi); },
               [lo, hi](Real x) { return (x < lo || x > hi) ? 0.0 : 1.0; });
}

Tensor huber(const Tensor& r, Real delta) {
  return unary(
      r,
      [delta](Real x) {
        const Real ax = std::abs(x);
        return ax <= delta ? 0.5 * x * x : delta * (ax - 0.5 * delta);
      },
      [delta](Real x) { return std::clamp(x, -delta, delta); });
}

// ---- reductions ------------------------------------------------------------

Tensor sum(const Tensor& a) {
  Real acc = 0.0;
  for (Real x : a.values()) acc += x;
  return Tensor::op({1, 1}, {acc}, {a},
                    [](std::span<const Real> g, std::span<const std::span<Real>> gi) {
                      for (Real& x : gi[0]) x += g[0];
                    });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw Error(ErrorCode::kShapeError, "mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<Real>(a.size()));
}

Tensor row_norm(const Tensor& a) {
  const std::size_t n = a.rows(), c = a.cols();
  auto x = a.values();
  std::vector<Real> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Real s = 0;
    for (std::size_t j = 0; j < c; ++j) s += x[i * c + j] * x[i * c + j];
    out[i] = std::sqrt(s);
  }
  Tensor result = Tensor::op({n, 1}, out, {a},
                             [a, out, n, c](std::span<const Real> g,
                                            std::span<const std::span<Real>> gi) {
                               auto x = a.values();
                               for (std::size_t i = 0; i < n; ++i) {
                                 if (out[i] <= 0) continue;
                                 const Real f = g[i] / out[i];
                                 for (std::size_t j = 0; j < c; ++j)
                                   gi[0][i * c + j] += f * x[i * c + j];
                               }
                             });
  return result;
}

// ---- linear algebra --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a.shape(), b.shape());
  const auto n = static_cast<Eigen::Index>(a.rows());
  const auto k = static_cast<Eigen::Index>(a.cols());
  const auto m = static_cast<Eigen::Index>(b.cols());
  std::vector<Real> out(static_cast<std::size_t>(n * m));
  ConstMapMat A(a.values().data(), n, k);
  ConstMapMat B(b.values().data(), k, m);
  MapMat(out.data(), n, m).noalias() = A * B;
  return Tensor::op({static_cast<std::size_t>(n), static_cast<std::size_t>(m)}, std::move(out),
                    {a, b},
                    [a, b, n, k, m](std::span<const Real> g, std::span<const std::span<Real>> gi) {
                      ConstMapMat G(g.data(), n, m);
                      if (!gi[0].empty()) {
                        ConstMapMat B(b.values().data(), k, m);
                        MapMat(gi[0].data(), n, k).noalias() += G * B.transpose();
                      }
                      if (!gi[1].empty()) {
                        ConstMapMat A(a.values().data(), n, k);
                        MapMat(gi[1].data(), k, m).noalias() += A.transpose() * G;
                      }
                    });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  return add_row(matmul(x, weight), bias);
}

// ---- row-wise normalizations -----------------------------------------------

Tensor softmax_rows(const Tensor& a) {
  const std::size_t n = a.rows(), c = a.cols();
  auto x = a.values();
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < n; ++i) {
    const Real* row = x.data() + i * c;
    Real mx = *std::max_element(row, row + c);
    Real s = 0;
    for (std::size_t j = 0; j < c; ++j) s += (out[i * c + j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= s;
  }
  return Tensor::op(a.shape(), out, {a},
                    [out, n, c](std::span<const Real> g, std::span<const std::span<Real>> gi) {
                      for (std::size_t i = 0; i < n; ++i) {
                        Real dot = 0;
                        for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * out[i * c + j];
                        for (std::size_t j = 0; j < c; ++j)
                          gi[0][i * c + j] += out[i * c + j] * (g[i * c + j] - dot);
                      }
                    });
}

Tensor normalize_rows(const Tensor& a) {
  const std::size_t n = a.rows(), c = a.cols();
  auto x = a.values();
  std::vector<Real> out(x.size());
  std::vector<Real> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    Real s = 0;
    for (std::size_t j = 0; j < c; ++j) s += x[i * c + j] * x[i * c + j];
    norms[i] = std::sqrt(s);
    if (!(norms[i] > 1e-12)) {
      throw Error(ErrorCode::kDegenerateRotation,
                  "normalize_rows: row " + std::to_string(i) + " has zero norm");
    }
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] / norms[i];
  }
  return Tensor::op(a.shape(), out, {a},
                    [out, norms, n, c](std::span<const Real> g,
                                       std::span<const std::span<Real>> gi) {
                      for (std::size_t i = 0; i < n; ++i) {
                        Real dot = 0;
                        for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * out[i * c + j];
                        for (std::size_t j = 0; j < c; ++j)
                          gi[0][i * c + j] += (g[i * c + j] - dot * out[i * c + j]) / norms[i];
                      }
                    });
}

Tensor rms_norm(const Tensor& x, const Tensor& gain, Real eps) {
  if (gain.rows() != 1 || gain.cols() != x.cols()) shape_error("rms_norm", x.shape(), gain.shape());
  const std::size_t n = x.rows(), c = x.cols();
  auto xv = x.values(), gv = gain.values();
  std::vector<Real> out(xv.size());
  std::vector<Real> inv(n);
  for (std::size_t i = 0; i < n; ++i) {
    Real s = 0;
    for (std::size_t j = 0; j < c; ++j) s += xv[i * c + j] * xv[i * c + j];
    inv[i] = 1.0 / std::sqrt(s / static_cast<Real>(c) + eps);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] * inv[i] * gv[j];
  }
  return Tensor::op(
      x.shape(), std::move(out), {x, gain},
      [x, gain, inv, n, c](std::span<const Real> g, std::span<const std::span<Real>> gi) {
        auto xv = x.values(), gv = gain.values();
        for (std::size_t i = 0; i < n; ++i) {
          const Real* xr = xv.data() + i * c;
          const Real* gr = g.data() + i * c;
          if (!gi[1].empty())
            for (std::size_t j = 0; j < c; ++j) gi[1][j] += gr[j] * xr[j] * inv[i];
          if (!gi[0].empty()) {
            // y_j = x_j * inv * w_j,  d inv / d x_k = -inv^3 x_k / c
            Real dot = 0;
            for (std::size_t j = 0; j < c; ++j) dot += gr[j] * gv[j] * xr[j];
            const Real f = inv[i] * inv[i] * inv[i] * dot / static_cast<Real>(c);
            for (std::size_t j = 0; j < c; ++j)
              gi[0][i * c + j] += gr[j] * gv[j] * inv[i] - f * xr[j];
          }
        }
      });
}

// ---- structure -------------------------------------------------------------

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw Error(ErrorCode::kShapeError, "concat_rows of nothing");
  const std::size_t c = parts[0].cols();
  std::size_t n = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) shape_error("concat_rows", parts[0].shape(), p.shape());
    n += p.rows();
  }
  std::vector<Real> out;
  out.reserve(n * c);
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    off += p.size();
  }
  return Tensor::op({n, c}, std::move(out), std::vector<Tensor>(parts.begin(), parts.end()),
                    [offsets](std::span<const Real> g, std::span<const std::span<Real>> gi) {
                      for (std::size_t k = 0; k < gi.size(); ++k) {
                        for (std::size_t i = 0; i < gi[k].size(); ++i)
                          gi[k][i] += g[offsets[k] + i];
                      }
                    });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw Error(ErrorCode::kShapeError, "concat_cols of nothing");
  const std::size_t n = parts[0].rows();
  std::size_t c = 0;
  std::vector<std::size_t> col_off;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    if (p.rows() != n) shape_error("concat_cols", parts[0].shape(), p.shape());
    col_off.push_back(c);
    widths.push_back(p.cols());
    c += p.cols();
  }
  std::vector<Real> out(n * c);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto v = parts[k].values();
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(v.data() + i * widths[k], widths[k], out.data() + i * c + col_off[k]);
  }
  return Tensor::op({n, c}, std::move(out), std::vector<Tensor>(parts.begin(), parts.end()),
                    [n, c, col_off, widths](std::span<const Real> g,
                                            std::span<const std::span<Real>> gi) {
                      for (std::size_t k = 0; k < gi.size(); ++k) {
                        if (gi[k].empty()) continue;
                        for (std::size_t i = 0; i < n; ++i)
                          for (std::size_t j = 0; j < widths[k]; ++j)
                            gi[k][i * widths[k] + j] += g[i * c + col_off[k] + j];
                      }
                    });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.rows()) {
    throw Error(ErrorCode::kShapeError, "slice_rows [" + std::to_string(begin) + "," +
                                            std::to_string(end) + ") of " + to_string(a.shape()));
  }
  const std::size_t c = a.cols();
  auto v = a.values();
  std::vector<Real> out(v.begin() + static_cast<std::ptrdiff_t>(begin * c),
                        v.begin() + static_cast<std::ptrdiff_t>(end * c));
  return Tensor::op({end - begin, c}, std::move(out), {a},
                    [begin, c](std::span<const Real> g, std::span<const std::span<Real>> gi) {
                      for (std::size_t i = 0; i < g.size(); ++i) gi[0][begin * c + i] += g[i];
                    });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.cols()) {
    throw Error(ErrorCode::kShapeError, "slice_cols [" + std::to_string(begin) + "," +
                                            std::to_string(end) + ") of " + to_string(a.shape()));
  }
  const std::size_t n = a.rows(), c = a.cols(), w = end - begin;
  auto v = a.values();
  std::vector<Real> out(n * w);
  for (std::size_t i = 0; i < n; ++i) std::copy_n(v.data() + i * c + begin, w, out.data() + i * w);
  return Tensor::op({n, w}, std::move(out), {a},
                    [n, c, w, begin](std::span<const Real> g, std::span<const std::span<Real>> gi) {
                      for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t j = 0; j < w; ++j) gi[0][i * c + begin + j] += g[i * w + j];
                    });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape.size() != a.size()) shape_error("reshape", a.shape(), shape);
  std::vector<Real> out(a.values().begin(), a.values().end());
  return Tensor::op(shape, std::move(out), {a},
                    [](std::span<const Real> g, std::span<const std::span<Real>> gi) {
                      for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
                    });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index) {
  const std::size_t c = a.cols();
  auto v = a.values();
  std::vector<Real> out(index.size() * c);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= a.rows()) {
      throw Error(ErrorCode::kShapeError, "gather_rows index " + std::to_string(index[i]) +
                                              " out of " + to_string(a.shape()));
    }
    std::copy_n(v.data() + index[i] * c, c, out.data() + i * c);
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return Tensor::op({index.size(), c}, std::move(out), {a},
                    [idx, c](std::span<const Real> g, std::span<const std::span<Real>> gi) {
                      for (std::size_t i = 0; i < idx.size(); ++i)
                        for (std::size_t j = 0; j < c; ++j) gi[0][idx[i] * c + j] += g[i * c + j];
                    });
}

Tensor repeat_rows(const Tensor& a, std::size_t times) {
  std::vector<std::size_t> idx(a.rows() * times);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i / times;
  return gather_rows(a, idx);
}

// ---- attention -------------------------------------------------------------

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads) {
  require_same("attention(q,k)", q, k);
  require_same("attention(q,v)", q, v);
  const std::size_t t = q.rows(), d = q.cols();
  if (heads == 0 || d % heads != 0) {
    throw Error(ErrorCode::kShapeError, "attention: width " + std::to_string(d) +
                                            " not divisible by " + std::to_string(heads));
  }
  const auto T = static_cast<Eigen::Index>(t);
  const auto D = static_cast<Eigen::Index>(d);
  const auto dh = D / static_cast<Eigen::Index>(heads);
  const Real inv_sqrt = 1.0 / std::sqrt(static_cast<Real>(dh));

  using Stride = Eigen::OuterStride<>;
  using ConstBlock = Eigen::Map<const RowMat, 0, Stride>;
  using Block = Eigen::Map<RowMat, 0, Stride>;

  auto probs = std::make_shared<std::vector<RowMat>>(heads);
  std::vector<Real> out(t * d);
  for (std::size_t h = 0; h < heads; ++h) {
    const auto off = static_cast<Eigen::Index>(h) * dh;
    ConstBlock Q(q.values().data() + off, T, dh, Stride(D));
    ConstBlock K(k.values().data() + off, T, dh, Stride(D));
    ConstBlock V(v.values().data() + off, T, dh, Stride(D));
    RowMat S = (Q * K.transpose()) * inv_sqrt;
    for (Eigen::Index i = 0; i < T; ++i) {
      auto row = S.row(i);
      const Real mx = row.maxCoeff();
      row = (row.array() - mx).exp();
      row /= row.sum();
    }
    Block O(out.data() + off, T, dh, Stride(D));
    O.noalias() = S * V;
    (*probs)[h] = std::move(S);
  }
  return Tensor::op(
      q.shape(), std::move(out), {q, k, v},
      [q, k, v, probs, T, D, dh, inv_sqrt, heads](std::span<const Real> g,
                                                  std::span<const std::span<Real>> gi) {
        for (std::size_t h = 0; h < heads; ++h) {
          const auto off = static_cast<Eigen::Index>(h) * dh;
          const RowMat& P = (*probs)[h];
          ConstBlock G(g.data() + off, T, dh, Stride(D));
          ConstBlock Q(q.values().data() + off, T, dh, Stride(D));
          ConstBlock K(k.values().data() + off, T, dh, Stride(D));
          ConstBlock V(v.values().data() + off, T, dh, Stride(D));
          if (!gi[2].empty()) {
            Block dV(gi[2].data() + off, T, dh, Stride(D));
            dV.noalias() += P.transpose() * G;
          }
          if (gi[0].empty() && gi[1].empty()) continue;
          RowMat dP = G * V.transpose();
          Eigen::Matrix<Real, Eigen::Dynamic, 1> rowdot = (dP.array() * P.array()).rowwise().sum();
          RowMat dS = P.array() * (dP.array().colwise() - rowdot.array());
          dS *= inv_sqrt;
          if (!gi[0].empty()) {
            Block dQ(gi[0].data() + off, T, dh, Stride(D));
            dQ.noalias() += dS * K;
          }
          if (!gi[1].empty()) {
            Block dK(gi[1].data() + off, T, dh, Stride(D));
            dK.noalias() += dS.transpose() * Q;
          }
        }
      });
}

}  // namespace dualsplat

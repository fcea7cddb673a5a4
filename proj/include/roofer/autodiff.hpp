// Copyright 2026 The Roofer Authors.
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

// Dense 64-bit tensors with tape-free reverse-mode differentiation.
//
// Every operation returns a new Tensor whose node remembers its inputs and a
// closure that pushes the output gradient back into them. The graph is the
// set of nodes reachable from a result; backward() orders it topologically
// and runs the closures in reverse. Nodes are only recorded when at least one
// input requires a gradient, so evaluation over frozen weights builds no
// graph at all.
//
// Matrices are rank 2, row-major. Bias and gain vectors are rank 1.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "roofer/error.hpp"

namespace roofer::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient arrives
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Node&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

// A shared handle to a node. Copies alias the same storage; clone() copies.
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
      : node_(std::make_shared<Node>()) {
    if (numel(shape) != values.size()) {
      throw ShapeMismatch("shape " + ad::to_string(shape) + " needs " +
                          std::to_string(numel(shape)) + " values, got " +
                          std::to_string(values.size()));
    }
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }
  static Tensor full(Shape shape, double v, bool requires_grad = false) {
    const auto n = numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, v), requires_grad);
  }
  static Tensor scalar(double v) { return Tensor({}, {v}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  std::size_t rows() const { return rank() == 2 ? shape()[0] : 1; }
  std::size_t cols() const { return rank() == 0 ? 1 : shape().back(); }

  const std::vector<double>& values() const { return node_->value; }
  std::vector<double>& mutable_values() { return node_->value; }
  double item() const {
    if (size() != 1) throw NotScalar("tensor of shape " + ad::to_string(shape()) + " is not a scalar");
    return node_->value[0];
  }
  double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
  double operator[](std::size_t i) const { return node_->value[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool is_leaf() const { return node_->leaf; }

  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  // Zeros when no gradient has been accumulated yet.
  std::vector<double> grad() const {
    return has_grad() ? node_->grad : std::vector<double>(size(), 0.0);
  }
  void zero_grad() { node_->grad.clear(); }
  void set_grad(std::vector<double> g) {
    if (g.size() != size()) throw ShapeMismatch("gradient size mismatch");
    node_->grad = std::move(g);
  }

  // Independent leaf with copied values and the same requires_grad flag.
  Tensor clone() const { return Tensor(shape(), values(), requires_grad()); }
  // Leaf sharing nothing with this graph; never requires a gradient.
  Tensor detach() const { return Tensor(shape(), values(), false); }

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  friend Tensor make_result(Shape, std::vector<double>, std::vector<Tensor>,
                            std::function<void(const Node&)>);
  std::shared_ptr<Node> node_;
};

// Builds an op result. The backward closure is kept only when some input
// requires a gradient.
inline Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                          std::function<void(const Node&)> backward) {
  Tensor out(std::move(shape), std::move(values));
  const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.requires_grad(); });
  if (needs) {
    Node& n = *out.node_;
    n.requires_grad = true;
    n.leaf = false;
    for (auto& t : inputs) n.parents.push_back(t.node_ptr());
    n.backward = std::move(backward);
  }
  return out;
}

// Training switch and randomness source for stochastic ops.
struct Mode {
  bool training = false;
  std::mt19937_64* rng = nullptr;

  static Mode eval() { return {}; }
  static Mode train(std::mt19937_64& rng) { return {true, &rng}; }
};

// Uniform draw in [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

namespace kernel {

inline void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeMismatch(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                        ad::to_string(t.shape()));
  }
}

inline void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeMismatch(std::string(op) + ": " + ad::to_string(a.shape()) + " vs " +
                        ad::to_string(b.shape()));
  }
}

inline void accumulate(Node* p, const std::vector<double>& g) {
  if (!p->requires_grad) return;
  auto& dst = p->grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

// C[m x n] += A[m x k] * B[k x n]
inline void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                    std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x n] += A[m x k] * B[n x k]^T
inline void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                    std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c[i * n + j] += s;
    }
  }
}

// C[k x n] += A[m x k]^T * B[m x n]
inline void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                    std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace kernel

// ---------------------------------------------------------------------------
// Linear algebra

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  kernel::require_rank(a, 2, "matmul");
  kernel::require_rank(b, 2, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeMismatch("matmul: " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  kernel::gemm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
  Node* an = a.node();
  Node* bn = b.node();
  return make_result({m, n}, std::move(out), {a, b}, [an, bn, m, k, n](const Node& self) {
    if (an->requires_grad) {
      kernel::gemm_nt(self.grad.data(), bn->value.data(), an->grad_buffer().data(), m, n, k);
    }
    if (bn->requires_grad) {
      kernel::gemm_tn(an->value.data(), self.grad.data(), bn->grad_buffer().data(), m, k, n);
    }
  });
}

// a * b^T for a [m x k], b [n x k].
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  kernel::require_rank(a, 2, "matmul_nt");
  kernel::require_rank(b, 2, "matmul_nt");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
  if (b.shape()[1] != k) {
    throw ShapeMismatch("matmul_nt: " + to_string(a.shape()) + " x " + to_string(b.shape()) + "^T");
  }
  std::vector<double> out(m * n, 0.0);
  kernel::gemm_nt(a.values().data(), b.values().data(), out.data(), m, k, n);
  Node* an = a.node();
  Node* bn = b.node();
  return make_result({m, n}, std::move(out), {a, b}, [an, bn, m, k, n](const Node& self) {
    if (an->requires_grad) {
      kernel::gemm_nn(self.grad.data(), bn->value.data(), an->grad_buffer().data(), m, n, k);
    }
    if (bn->requires_grad) {
      kernel::gemm_tn(self.grad.data(), an->value.data(), bn->grad_buffer().data(), m, n, k);
    }
  });
}

// x [m x k] * w [k x n] + b [n]
inline Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  kernel::require_rank(b, 1, "affine bias");
  kernel::require_rank(x, 2, "affine");
  kernel::require_rank(w, 2, "affine");
  const std::size_t m = x.shape()[0], k = x.shape()[1], n = w.shape()[1];
  if (w.shape()[0] != k || b.shape()[0] != n) {
    throw ShapeMismatch("affine: " + to_string(x.shape()) + " x " + to_string(w.shape()) + " + " +
                        to_string(b.shape()));
  }
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) std::copy(b.values().begin(), b.values().end(), out.begin() + i * n);
  kernel::gemm_nn(x.values().data(), w.values().data(), out.data(), m, k, n);
  Node* xn = x.node();
  Node* wn = w.node();
  Node* bn = b.node();
  return make_result({m, n}, std::move(out), {x, w, b}, [xn, wn, bn, m, k, n](const Node& self) {
    if (xn->requires_grad) {
      kernel::gemm_nt(self.grad.data(), wn->value.data(), xn->grad_buffer().data(), m, n, k);
    }
    if (wn->requires_grad) {
      kernel::gemm_tn(xn->value.data(), self.grad.data(), wn->grad_buffer().data(), m, k, n);
    }
    if (bn->requires_grad) {
      auto& g = bn->grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
    }
  });
}

inline Tensor transpose(const Tensor& x) {
  kernel::require_rank(x, 2, "transpose");
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x.values()[i * n + j];
  Node* xn = x.node();
  return make_result({n, m}, std::move(out), {x}, [xn, m, n](const Node& self) {
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j * m + i];
  });
}

// ---------------------------------------------------------------------------
// Elementwise

inline Tensor add(const Tensor& a, const Tensor& b) {
  kernel::require_same(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  Node* an = a.node();
  Node* bn = b.node();
  return make_result(a.shape(), std::move(out), {a, b}, [an, bn](const Node& self) {
    kernel::accumulate(an, self.grad);
    kernel::accumulate(bn, self.grad);
  });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  kernel::require_same(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  Node* an = a.node();
  Node* bn = b.node();
  return make_result(a.shape(), std::move(out), {a, b}, [an, bn](const Node& self) {
    if (an->requires_grad) {
      auto& g = an->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      auto& g = bn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * an->value[i];
    }
  });
}

inline Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * s;
  Node* an = a.node();
  return make_result(a.shape(), std::move(out), {a}, [an, s](const Node& self) {
    auto& g = an->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * s;
  });
}

inline Tensor add_scalar(const Tensor& a, double s) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + s;
  Node* an = a.node();
  return make_result(a.shape(), std::move(out), {a},
                     [an](const Node& self) { kernel::accumulate(an, self.grad); });
}

namespace kernel {

template <class F, class D>
Tensor unary(const Tensor& x, F f, D dfdx) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
  Node* xn = x.node();
  return make_result(x.shape(), std::move(out), {x}, [xn, dfdx](const Node& self) {
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * dfdx(xn->value[i], self.value[i]);
  });
}

}  // namespace kernel

// Exact (erf) GELU.
inline Tensor gelu(const Tensor& x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return kernel::unary(
      x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
      [](double v, double) {
        return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
      });
}

inline Tensor tanh(const Tensor& x) {
  return kernel::unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

inline Tensor sigmoid(const Tensor& x) {
  return kernel::unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

// Inverted dropout: kept entries are scaled by 1/(1-p). Identity unless
// mode.training and p > 0.
inline Tensor dropout(const Tensor& x, double p, const Mode& mode) {
  if (!mode.training || p <= 0.0) return x;
  if (p >= 1.0) throw InvalidArgument("dropout probability must be below 1");
  if (mode.rng == nullptr) throw InvalidArgument("training mode needs a random source");
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(x.size());
  for (auto& m : mask) m = uniform01(*mode.rng) < p ? 0.0 : keep_scale;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * mask[i];
  Node* xn = x.node();
  return make_result(x.shape(), std::move(out), {x}, [xn, mask = std::move(mask)](const Node& self) {
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
  });
}

// ---------------------------------------------------------------------------
// Reductions and layout

inline Tensor sum(const Tensor& x) {
  const double s = std::accumulate(x.values().begin(), x.values().end(), 0.0);
  Node* xn = x.node();
  return make_result({}, {s}, {x}, [xn](const Node& self) {
    auto& g = xn->grad_buffer();
    for (auto& v : g) v += self.grad[0];
  });
}

// Mean over the rows of x [m x d] whose mask entry is true; returns [d].
inline Tensor mean_rows(const Tensor& x, const std::vector<bool>& mask) {
  kernel::require_rank(x, 2, "mean_rows");
  const std::size_t m = x.shape()[0], d = x.shape()[1];
  if (mask.size() != m) throw ShapeMismatch("mean_rows: mask length differs from row count");
  const auto count = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  if (count == 0) throw NoUnmaskedPositions("mean over rows needs at least one unmasked row");
  const double inv = 1.0 / static_cast<double>(count);
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (!mask[i]) continue;
    for (std::size_t j = 0; j < d; ++j) out[j] += x.values()[i * d + j];
  }
  for (auto& v : out) v *= inv;
  Node* xn = x.node();
  return make_result({d}, std::move(out), {x}, [xn, mask, inv, m, d](const Node& self) {
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < m; ++i) {
      if (!mask[i]) continue;
      for (std::size_t j = 0; j < d; ++j) g[i * d + j] += self.grad[j] * inv;
    }
  });
}

inline Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw ShapeMismatch("reshape: " + to_string(x.shape()) + " to " + to_string(shape));
  }
  Node* xn = x.node();
  return make_result(std::move(shape), x.values(), {x},
                     [xn](const Node& self) { kernel::accumulate(xn, self.grad); });
}

// Stacks matrices with equal column counts along the sequence (row) axis.
inline Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_rows: nothing to concatenate");
  const std::size_t d = parts.front().cols();
  std::size_t m = 0;
  for (const auto& p : parts) {
    kernel::require_rank(p, 2, "concat_rows");
    if (p.cols() != d) throw ShapeMismatch("concat_rows: column counts differ");
    m += p.rows();
  }
  std::vector<double> out;
  out.reserve(m * d);
  std::vector<Node*> nodes;
  for (const auto& p : parts) {
    out.insert(out.end(), p.values().begin(), p.values().end());
    nodes.push_back(p.node());
  }
  return make_result({m, d}, std::move(out), parts, [nodes](const Node& self) {
    std::size_t offset = 0;
    for (Node* n : nodes) {
      const std::size_t len = n->value.size();
      if (n->requires_grad) {
        auto& g = n->grad_buffer();
        for (std::size_t i = 0; i < len; ++i) g[i] += self.grad[offset + i];
      }
      offset += len;
    }
  });
}

inline Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  kernel::require_rank(x, 2, "slice_rows");
  const std::size_t d = x.cols();
  if (begin + count > x.rows()) throw ShapeMismatch("slice_rows: range out of bounds");
  std::vector<double> out(x.values().begin() + static_cast<std::ptrdiff_t>(begin * d),
                          x.values().begin() + static_cast<std::ptrdiff_t>((begin + count) * d));
  Node* xn = x.node();
  return make_result({count, d}, std::move(out), {x}, [xn, begin, d](const Node& self) {
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * d + i] += self.grad[i];
  });
}

inline Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
  kernel::require_rank(x, 2, "slice_cols");
  const std::size_t m = x.rows(), n = x.cols();
  if (begin + count > n) throw ShapeMismatch("slice_cols: range out of bounds");
  std::vector<double> out(m * count);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = x.values()[i * n + begin + j];
  Node* xn = x.node();
  return make_result({m, count}, std::move(out), {x}, [xn, begin, count, m, n](const Node& self) {
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < count; ++j) g[i * n + begin + j] += self.grad[i * count + j];
  });
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_cols: nothing to concatenate");
  const std::size_t m = parts.front().rows();
  std::size_t n = 0;
  for (const auto& p : parts) {
    kernel::require_rank(p, 2, "concat_cols");
    if (p.rows() != m) throw ShapeMismatch("concat_cols: row counts differ");
    n += p.cols();
  }
  std::vector<double> out(m * n);
  std::vector<std::pair<Node*, std::size_t>> nodes;  // (node, column offset)
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t c = p.cols();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(p.values().begin() + static_cast<std::ptrdiff_t>(i * c), c,
                  out.begin() + static_cast<std::ptrdiff_t>(i * n + off));
    nodes.emplace_back(p.node(), off);
    off += c;
  }
  return make_result({m, n}, std::move(out), parts, [nodes, m, n](const Node& self) {
    for (auto [node, offset] : nodes) {
      if (!node->requires_grad) continue;
      auto& g = node->grad_buffer();
      const std::size_t c = node->shape[1];
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[i * n + offset + j];
    }
  });
}

// Rows of table [V x d] selected by ids; the gradient scatters back with
// accumulation for repeated ids.
inline Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
  kernel::require_rank(table, 2, "embedding");
  const std::size_t vocab = table.rows(), d = table.cols();
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw IdOutOfRange("id " + std::to_string(ids[i]) + " outside table of " +
                         std::to_string(vocab) + " rows");
    }
    std::copy_n(table.values().begin() + static_cast<std::ptrdiff_t>(ids[i] * d), d,
                out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  Node* tn = table.node();
  return make_result({ids.size(), d}, std::move(out), {table}, [tn, ids, d](const Node& self) {
    auto& g = tn->grad_buffer();
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) g[static_cast<std::size_t>(ids[i]) * d + j] += self.grad[i * d + j];
  });
}

// Adds `penalty` to every column whose key_mask entry is false. The mask
// carries no gradient.
inline Tensor mask_keys(const Tensor& scores, const std::vector<bool>& key_mask,
                        double penalty = -1e9) {
  kernel::require_rank(scores, 2, "mask_keys");
  const std::size_t m = scores.rows(), n = scores.cols();
  if (key_mask.size() != n) throw ShapeMismatch("mask_keys: mask length differs from key count");
  std::vector<double> out(scores.values());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (!key_mask[j]) out[i * n + j] += penalty;
  Node* sn = scores.node();
  return make_result({m, n}, std::move(out), {scores},
                     [sn](const Node& self) { kernel::accumulate(sn, self.grad); });
}

// ---------------------------------------------------------------------------
// Normalization and losses

inline Tensor softmax_rows(const Tensor& x) {
  kernel::require_rank(x, 2, "softmax_rows");
  const std::size_t m = x.rows(), n = x.cols();
  if (n == 0) throw ShapeMismatch("softmax_rows: rows must be non-empty");
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = x.values().data() + i * n;
    double* o = out.data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += (o[j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < n; ++j) o[j] /= z;
  }
  Node* xn = x.node();
  return make_result({m, n}, std::move(out), {x}, [xn, m, n](const Node& self) {
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < m; ++i) {
      const double* y = self.value.data() + i * n;
      const double* gy = self.grad.data() + i * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += y[j] * gy[j];
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += y[j] * (gy[j] - dot);
    }
  });
}

inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-12) {
  kernel::require_rank(x, 2, "layer_norm");
  const std::size_t m = x.rows(), d = x.cols();
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    throw ShapeMismatch("layer_norm: gain/bias must have shape [" + std::to_string(d) + "]");
  }
  if (!(eps > 0.0)) throw InvalidArgument("layer_norm: eps must be positive");
  std::vector<double> out(m * d), xhat(m * d), inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = x.values().data() + i * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(d);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[i * d + j] = (row[j] - mean) * inv_std[i];
      out[i * d + j] = xhat[i * d + j] * gain[j] + bias[j];
    }
  }
  Node* xn = x.node();
  Node* gn = gain.node();
  Node* bn = bias.node();
  return make_result(
      {m, d}, std::move(out), {x, gain, bias},
      [xn, gn, bn, m, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](const Node& self) {
        if (gn->requires_grad) {
          auto& gg = gn->grad_buffer();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < d; ++j) gg[j] += self.grad[i * d + j] * xhat[i * d + j];
        }
        if (bn->requires_grad) {
          auto& gb = bn->grad_buffer();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < d; ++j) gb[j] += self.grad[i * d + j];
        }
        if (!xn->requires_grad) return;
        auto& gx = xn->grad_buffer();
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t i = 0; i < m; ++i) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double gh = self.grad[i * d + j] * gn->value[j];
            sum_g += gh;
            sum_gx += gh * xhat[i * d + j];
          }
          for (std::size_t j = 0; j < d; ++j) {
            const double gh = self.grad[i * d + j] * gn->value[j];
            gx[i * d + j] += inv_std[i] * (gh - inv_d * sum_g - xhat[i * d + j] * inv_d * sum_gx);
          }
        }
      });
}

// Mean over non-ignored rows of -log softmax(logits)[target].
inline Tensor cross_entropy_from_logits(const Tensor& logits, const std::vector<int>& targets,
                                        int ignore_index = -100) {
  kernel::require_rank(logits, 2, "cross_entropy");
  const std::size_t m = logits.rows(), c = logits.cols();
  if (targets.size() != m) throw ShapeMismatch("cross_entropy: one target per row required");
  std::size_t count = 0;
  for (int t : targets) {
    if (t == ignore_index) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= c) {
      throw InvalidArgument("cross_entropy: target " + std::to_string(t) + " outside [0, " +
                            std::to_string(c) + ")");
    }
    ++count;
  }
  if (count == 0) throw AllIgnored("every target equals the ignore index");

  std::vector<double> probs(m * c, 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (targets[i] == ignore_index) continue;
    const double* row = logits.values().data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    const double log_z = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(row[j] - log_z);
    loss += log_z - row[targets[i]];
  }
  const double inv = 1.0 / static_cast<double>(count);
  Node* ln = logits.node();
  return make_result({}, {loss * inv}, {logits},
                     [ln, targets, ignore_index, probs = std::move(probs), inv, m, c](const Node& self) {
                       auto& g = ln->grad_buffer();
                       const double s = self.grad[0] * inv;
                       for (std::size_t i = 0; i < m; ++i) {
                         if (targets[i] == ignore_index) continue;
                         for (std::size_t j = 0; j < c; ++j) g[i * c + j] += s * probs[i * c + j];
                         g[i * c + static_cast<std::size_t>(targets[i])] -= s;
                       }
                     });
}

// ---------------------------------------------------------------------------
// Backward pass

// Nodes reachable from root, parents before children.
inline std::vector<Node*> topological_order(Node* root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

// Seeds d(loss)/d(loss) = 1 and propagates. Leaf gradients accumulate across
// calls; interior gradients are recomputed each call.
inline void backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw NotScalar("backward needs a scalar, got shape " + to_string(loss.shape()));
  }
  Node* root = loss.node();
  if (!root->requires_grad) return;
  const auto order = topological_order(root);
  for (Node* n : order) {
    if (!n->leaf) n->grad.assign(n->value.size(), 0.0);
  }
  root->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->leaf && n->backward) n->backward(*n);
  }
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check

struct GradCheckReport {
  double max_relative_error = 0.0;
  bool pass = false;
  std::size_t checked = 0;
};

// Compares analytic gradients of f with respect to every entry of `inputs`
// against central differences. Relative error uses a max(1, |analytic|,
// |numeric|) denominator. f must rebuild its graph from the current input
// values on each call.
inline GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                                  double h, double tol) {
  if (!(h > 0.0)) throw InvalidArgument("grad_check: step must be positive");
  const Tensor base = f();
  if (base.size() != 1) throw NotScalar("grad_check: f must return a scalar");
  if (f().item() != base.item()) {
    throw NonDeterministic("two evaluations at the same point differ");
  }

  std::vector<std::vector<double>> saved;
  for (auto& x : inputs) {
    saved.push_back(x.grad());
    x.zero_grad();
  }
  backward(base);

  GradCheckReport report;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    Tensor& x = inputs[t];
    const std::vector<double> analytic = x.grad();
    auto& values = x.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + h;
      const double up = f().item();
      values[i] = original - h;
      const double down = f().item();
      values[i] = original;
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
      report.max_relative_error =
          std::max(report.max_relative_error, std::abs(analytic[i] - numeric) / denom);
      ++report.checked;
    }
    x.set_grad(saved[t]);
  }
  report.pass = report.max_relative_error <= tol;
  return report;
}

}  // namespace roofer::ad

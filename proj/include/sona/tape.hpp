// Copyright 2026 The sonalab Authors.
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
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "sona/tensor.hpp"

namespace sona {

/// Handle to a node on a Tape. Only meaningful together with the tape that
/// produced it.
struct Val {
  int id = -1;
};

namespace detail {

inline double stable_sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// logsigma(t) = min(t,0) - log1p(exp(-|t|)); exact at both tails.
inline double stable_logsigmoid(double t) {
  return std::min(t, 0.0) - std::log1p(std::exp(-std::fabs(t)));
}

inline double stable_softplus(double t) {
  return std::max(t, 0.0) + std::log1p(std::exp(-std::fabs(t)));
}

}  // namespace detail

/// Recorded forward values of the stop_gradient nodes of one graph build.
/// Replaying them into a rebuild pins the frozen branches at their reference
/// values, which makes the rebuilt scalar exactly the function the tape
/// differentiates; finite differences of it are then a valid oracle for
/// losses that contain stop-gradients.
struct SgTrace {
  std::vector<Tensor> values;
  size_t cursor = 0;
  bool replay = false;
};

/// Reverse-mode tape over dense matrices. One tape records one forward pass;
/// backward() may run once, after which gradients of every `requires_grad`
/// leaf registered on the tape are populated (exact zeros when no gradient
/// path reaches them). A fresh tape is built per training step.
class Tape {
 public:
  Tape() { nodes_.reserve(256); }
  explicit Tape(SgTrace* trace) : trace_(trace) {
    nodes_.reserve(256);
    if (trace_ != nullptr) trace_->cursor = 0;
  }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // ---- inputs -------------------------------------------------------------

  /// Registers an external tensor. Its value is copied; if `t.requires_grad`
  /// the backward pass accumulates into `t.grad`.
  Val leaf(Tensor& t) {
    Node n;
    n.value.rows = t.rows;
    n.value.cols = t.cols;
    n.value.values = t.values;
    n.needs_grad = t.requires_grad;
    n.leaf = &t;
    return push(std::move(n));
  }

  /// Value-only input; never receives gradient.
  Val constant(Tensor t) {
    Node n;
    n.value = std::move(t);
    n.needs_grad = false;
    return push(std::move(n));
  }

  Val constant_scalar(double x) { return constant(Tensor::scalar(x)); }

  // ---- queries ------------------------------------------------------------

  int rows(Val v) const { return node(v).value.rows; }
  int cols(Val v) const { return node(v).value.cols; }
  const Tensor& value(Val v) const { return node(v).value; }

  double scalar(Val v) const {
    const Tensor& t = node(v).value;
    if (t.rows != 1 || t.cols != 1)
      throw ContractError("scalar: node has shape " + t.shape_str() + ", expected 1x1");
    return t.values[0];
  }

  // ---- elementwise / scalar ops --------------------------------------------

  Val add(Val a, Val b) {
    check_same_shape(node(a).value, node(b).value, "add");
    Node n = unary_like(a);
    const auto& av = node(a).value.values;
    const auto& bv = node(b).value.values;
    for (size_t i = 0; i < av.size(); ++i) n.value.values[i] = av[i] + bv[i];
    n.needs_grad = needs(a) || needs(b);
    n.back = [a, b](Tape& t, int self) {
      const auto& g = t.adj(self);
      t.accum(a, [&](std::vector<double>& da) {
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i];
      });
      t.accum(b, [&](std::vector<double>& db) {
        for (size_t i = 0; i < g.size(); ++i) db[i] += g[i];
      });
    };
    return push(std::move(n));
  }

  Val sub(Val a, Val b) {
    check_same_shape(node(a).value, node(b).value, "sub");
    Node n = unary_like(a);
    const auto& av = node(a).value.values;
    const auto& bv = node(b).value.values;
    for (size_t i = 0; i < av.size(); ++i) n.value.values[i] = av[i] - bv[i];
    n.needs_grad = needs(a) || needs(b);
    n.back = [a, b](Tape& t, int self) {
      const auto& g = t.adj(self);
      t.accum(a, [&](std::vector<double>& da) {
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i];
      });
      t.accum(b, [&](std::vector<double>& db) {
        for (size_t i = 0; i < g.size(); ++i) db[i] -= g[i];
      });
    };
    return push(std::move(n));
  }

  Val mul(Val a, Val b) {
    check_same_shape(node(a).value, node(b).value, "mul");
    Node n = unary_like(a);
    const auto& av = node(a).value.values;
    const auto& bv = node(b).value.values;
    for (size_t i = 0; i < av.size(); ++i) n.value.values[i] = av[i] * bv[i];
    n.needs_grad = needs(a) || needs(b);
    n.back = [a, b](Tape& t, int self) {
      const auto& g = t.adj(self);
      const auto& av = t.node(a).value.values;
      const auto& bv = t.node(b).value.values;
      t.accum(a, [&](std::vector<double>& da) {
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] * bv[i];
      });
      t.accum(b, [&](std::vector<double>& db) {
        for (size_t i = 0; i < g.size(); ++i) db[i] += g[i] * av[i];
      });
    };
    return push(std::move(n));
  }

  Val scale(Val a, double c) {
    Node n = unary_like(a);
    const auto& av = node(a).value.values;
    for (size_t i = 0; i < av.size(); ++i) n.value.values[i] = c * av[i];
    n.needs_grad = needs(a);
    n.back = [a, c](Tape& t, int self) {
      const auto& g = t.adj(self);
      t.accum(a, [&](std::vector<double>& da) {
        for (size_t i = 0; i < g.size(); ++i) da[i] += c * g[i];
      });
    };
    return push(std::move(n));
  }

  Val neg(Val a) { return scale(a, -1.0); }

  /// Broadcast-add a 1x1 node to every entry.
  Val add_scalar(Val a, Val s) {
    require_scalar(s, "add_scalar");
    Node n = unary_like(a);
    const double sv = node(s).value.values[0];
    const auto& av = node(a).value.values;
    for (size_t i = 0; i < av.size(); ++i) n.value.values[i] = av[i] + sv;
    n.needs_grad = needs(a) || needs(s);
    n.back = [a, s](Tape& t, int self) {
      const auto& g = t.adj(self);
      t.accum(a, [&](std::vector<double>& da) {
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i];
      });
      t.accum(s, [&](std::vector<double>& ds) {
        double acc = 0.0;
        for (double gi : g) acc += gi;
        ds[0] += acc;
      });
    };
    return push(std::move(n));
  }

  /// Broadcast-multiply by a 1x1 node.
  Val mul_scalar(Val a, Val s) {
    require_scalar(s, "mul_scalar");
    Node n = unary_like(a);
    const double sv = node(s).value.values[0];
    const auto& av = node(a).value.values;
    for (size_t i = 0; i < av.size(); ++i) n.value.values[i] = av[i] * sv;
    n.needs_grad = needs(a) || needs(s);
    n.back = [a, s](Tape& t, int self) {
      const auto& g = t.adj(self);
      const double sv = t.node(s).value.values[0];
      const auto& av = t.node(a).value.values;
      t.accum(a, [&](std::vector<double>& da) {
        for (size_t i = 0; i < g.size(); ++i) da[i] += sv * g[i];
      });
      t.accum(s, [&](std::vector<double>& ds) {
        double acc = 0.0;
        for (size_t i = 0; i < g.size(); ++i) acc += g[i] * av[i];
        ds[0] += acc;
      });
    };
    return push(std::move(n));
  }

  /// Broadcast-divide by a 1x1 node.
  Val div_scalar(Val a, Val s) {
    require_scalar(s, "div_scalar");
    Node n = unary_like(a);
    const double sv = node(s).value.values[0];
    const auto& av = node(a).value.values;
    for (size_t i = 0; i < av.size(); ++i) n.value.values[i] = av[i] / sv;
    n.needs_grad = needs(a) || needs(s);
    n.back = [a, s](Tape& t, int self) {
      const auto& g = t.adj(self);
      const double sv = t.node(s).value.values[0];
      const auto& av = t.node(a).value.values;
      t.accum(a, [&](std::vector<double>& da) {
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] / sv;
      });
      t.accum(s, [&](std::vector<double>& ds) {
        double acc = 0.0;
        for (size_t i = 0; i < g.size(); ++i) acc += g[i] * av[i];
        ds[0] -= acc / (sv * sv);
      });
    };
    return push(std::move(n));
  }

  // ---- matrix ops -----------------------------------------------------------

  Val matmul(Val a, Val b) {
    const Tensor& A = node(a).value;
    const Tensor& B = node(b).value;
    if (A.cols != B.rows)
      throw ShapeError("matmul: inner dimensions differ, " + A.shape_str() + " vs " +
                       B.shape_str());
    Node n;
    n.value = Tensor(A.rows, B.cols);
    matmul_into(A, B, n.value);
    n.needs_grad = needs(a) || needs(b);
    n.back = [a, b](Tape& t, int self) {
      const Tensor& A = t.node(a).value;
      const Tensor& B = t.node(b).value;
      const auto& g = t.adj(self);
      // dA += G * B^T
      t.accum(a, [&](std::vector<double>& da) {
        for (int i = 0; i < A.rows; ++i) {
          const double* grow = &g[static_cast<size_t>(i) * B.cols];
          double* darow = &da[static_cast<size_t>(i) * A.cols];
          for (int k = 0; k < A.cols; ++k) {
            const double* brow = &B.values[static_cast<size_t>(k) * B.cols];
            double acc = 0.0;
            for (int j = 0; j < B.cols; ++j) acc += grow[j] * brow[j];
            darow[k] += acc;
          }
        }
      });
      // dB += A^T * G
      t.accum(b, [&](std::vector<double>& db) {
        for (int i = 0; i < A.rows; ++i) {
          const double* arow = &A.values[static_cast<size_t>(i) * A.cols];
          const double* grow = &g[static_cast<size_t>(i) * B.cols];
          for (int k = 0; k < A.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            double* dbrow = &db[static_cast<size_t>(k) * B.cols];
            for (int j = 0; j < B.cols; ++j) dbrow[j] += aik * grow[j];
          }
        }
      });
    };
    return push(std::move(n));
  }

  Val transpose(Val a) {
    const Tensor& A = node(a).value;
    Node n;
    n.value = Tensor(A.cols, A.rows);
    for (int i = 0; i < A.rows; ++i)
      for (int j = 0; j < A.cols; ++j) n.value.at(j, i) = A.at(i, j);
    n.needs_grad = needs(a);
    n.back = [a](Tape& t, int self) {
      const Tensor& out = t.node(Val{self}).value;
      const auto& g = t.adj(self);
      t.accum(a, [&](std::vector<double>& da) {
        const int r = out.rows, c = out.cols;  // out is A^T
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j)
            da[static_cast<size_t>(j) * r + i] += g[static_cast<size_t>(i) * c + j];
      });
    };
    return push(std::move(n));
  }

  /// Horizontal concatenation: rows of `a` extended by the rows of `b`.
  Val concat_cols(Val a, Val b) {
    const Tensor& A = node(a).value;
    const Tensor& B = node(b).value;
    if (A.rows != B.rows)
      throw ShapeError("concat_cols: row counts differ, " + A.shape_str() + " vs " +
                       B.shape_str());
    Node n;
    n.value = Tensor(A.rows, A.cols + B.cols);
    for (int i = 0; i < A.rows; ++i) {
      for (int j = 0; j < A.cols; ++j) n.value.at(i, j) = A.at(i, j);
      for (int j = 0; j < B.cols; ++j) n.value.at(i, A.cols + j) = B.at(i, j);
    }
    n.needs_grad = needs(a) || needs(b);
    const int ac = A.cols, bc = B.cols;
    n.back = [a, b, ac, bc](Tape& t, int self) {
      const auto& g = t.adj(self);
      const int rows = t.node(Val{self}).value.rows;
      const int oc = ac + bc;
      t.accum(a, [&](std::vector<double>& da) {
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < ac; ++j)
            da[static_cast<size_t>(i) * ac + j] += g[static_cast<size_t>(i) * oc + j];
      });
      t.accum(b, [&](std::vector<double>& db) {
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < bc; ++j)
            db[static_cast<size_t>(i) * bc + j] += g[static_cast<size_t>(i) * oc + ac + j];
      });
    };
    return push(std::move(n));
  }

  /// a (n x c) + v (1 x c), broadcast over rows.
  Val add_rowvec(Val a, Val v) {
    const Tensor& A = node(a).value;
    const Tensor& V = node(v).value;
    if (V.rows != 1 || V.cols != A.cols)
      throw ShapeError("add_rowvec: expected 1x" + std::to_string(A.cols) + ", got " +
                       V.shape_str());
    Node n = unary_like(a);
    for (int i = 0; i < A.rows; ++i)
      for (int j = 0; j < A.cols; ++j) n.value.at(i, j) = A.at(i, j) + V.values[j];
    n.needs_grad = needs(a) || needs(v);
    n.back = [a, v](Tape& t, int self) {
      const auto& g = t.adj(self);
      const Tensor& A = t.node(a).value;
      t.accum(a, [&](std::vector<double>& da) {
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i];
      });
      t.accum(v, [&](std::vector<double>& dv) {
        for (int i = 0; i < A.rows; ++i)
          for (int j = 0; j < A.cols; ++j) dv[j] += g[static_cast<size_t>(i) * A.cols + j];
      });
    };
    return push(std::move(n));
  }

  /// a (n x c) * v (1 x c), broadcast over rows.
  Val mul_rowvec(Val a, Val v) {
    const Tensor& A = node(a).value;
    const Tensor& V = node(v).value;
    if (V.rows != 1 || V.cols != A.cols)
      throw ShapeError("mul_rowvec: expected 1x" + std::to_string(A.cols) + ", got " +
                       V.shape_str());
    Node n = unary_like(a);
    for (int i = 0; i < A.rows; ++i)
      for (int j = 0; j < A.cols; ++j) n.value.at(i, j) = A.at(i, j) * V.values[j];
    n.needs_grad = needs(a) || needs(v);
    n.back = [a, v](Tape& t, int self) {
      const auto& g = t.adj(self);
      const Tensor& A = t.node(a).value;
      const Tensor& V = t.node(v).value;
      t.accum(a, [&](std::vector<double>& da) {
        for (int i = 0; i < A.rows; ++i)
          for (int j = 0; j < A.cols; ++j)
            da[static_cast<size_t>(i) * A.cols + j] +=
                g[static_cast<size_t>(i) * A.cols + j] * V.values[j];
      });
      t.accum(v, [&](std::vector<double>& dv) {
        for (int i = 0; i < A.rows; ++i)
          for (int j = 0; j < A.cols; ++j)
            dv[j] += g[static_cast<size_t>(i) * A.cols + j] *
                     A.values[static_cast<size_t>(i) * A.cols + j];
      });
    };
    return push(std::move(n));
  }

  /// a (n x c) - col (n x 1), broadcast over columns.
  Val sub_colvec(Val a, Val c) {
    const Tensor& A = node(a).value;
    const Tensor& C = node(c).value;
    if (C.cols != 1 || C.rows != A.rows)
      throw ShapeError("sub_colvec: expected " + std::to_string(A.rows) + "x1, got " +
                       C.shape_str());
    Node n = unary_like(a);
    for (int i = 0; i < A.rows; ++i)
      for (int j = 0; j < A.cols; ++j) n.value.at(i, j) = A.at(i, j) - C.values[i];
    n.needs_grad = needs(a) || needs(c);
    n.back = [a, c](Tape& t, int self) {
      const auto& g = t.adj(self);
      const Tensor& A = t.node(a).value;
      t.accum(a, [&](std::vector<double>& da) {
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i];
      });
      t.accum(c, [&](std::vector<double>& dc) {
        for (int i = 0; i < A.rows; ++i) {
          double acc = 0.0;
          for (int j = 0; j < A.cols; ++j) acc += g[static_cast<size_t>(i) * A.cols + j];
          dc[i] -= acc;
        }
      });
    };
    return push(std::move(n));
  }

  // ---- reductions -----------------------------------------------------------

  /// Per-row sum: (n x c) -> (n x 1).
  Val row_sum(Val a) {
    const Tensor& A = node(a).value;
    Node n;
    n.value = Tensor(A.rows, 1);
    for (int i = 0; i < A.rows; ++i) {
      double acc = 0.0;
      for (int j = 0; j < A.cols; ++j) acc += A.at(i, j);
      n.value.values[i] = acc;
    }
    n.needs_grad = needs(a);
    n.back = [a](Tape& t, int self) {
      const auto& g = t.adj(self);
      const Tensor& A = t.node(a).value;
      t.accum(a, [&](std::vector<double>& da) {
        for (int i = 0; i < A.rows; ++i)
          for (int j = 0; j < A.cols; ++j) da[static_cast<size_t>(i) * A.cols + j] += g[i];
      });
    };
    return push(std::move(n));
  }

  Val sum(Val a) {
    Node n;
    n.value = Tensor(1, 1);
    double acc = 0.0;
    for (double x : node(a).value.values) acc += x;
    n.value.values[0] = acc;
    n.needs_grad = needs(a);
    n.back = [a](Tape& t, int self) {
      const double g = t.adj(self)[0];
      t.accum(a, [&](std::vector<double>& da) {
        for (auto& d : da) d += g;
      });
    };
    return push(std::move(n));
  }

  Val mean(Val a) {
    const size_t count = node(a).value.size();
    if (count == 0) throw ContractError("mean: empty tensor");
    Node n;
    n.value = Tensor(1, 1);
    double acc = 0.0;
    for (double x : node(a).value.values) acc += x;
    n.value.values[0] = acc / static_cast<double>(count);
    n.needs_grad = needs(a);
    n.back = [a, count](Tape& t, int self) {
      const double g = t.adj(self)[0] / static_cast<double>(count);
      t.accum(a, [&](std::vector<double>& da) {
        for (auto& d : da) d += g;
      });
    };
    return push(std::move(n));
  }

  /// Inner product of two same-shape tensors, flattened: -> (1 x 1).
  Val dot(Val a, Val b) {
    check_same_shape(node(a).value, node(b).value, "dot");
    Node n;
    n.value = Tensor(1, 1);
    const auto& av = node(a).value.values;
    const auto& bv = node(b).value.values;
    double acc = 0.0;
    for (size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
    n.value.values[0] = acc;
    n.needs_grad = needs(a) || needs(b);
    n.back = [a, b](Tape& t, int self) {
      const double g = t.adj(self)[0];
      const auto& av = t.node(a).value.values;
      const auto& bv = t.node(b).value.values;
      t.accum(a, [&](std::vector<double>& da) {
        for (size_t i = 0; i < da.size(); ++i) da[i] += g * bv[i];
      });
      t.accum(b, [&](std::vector<double>& db) {
        for (size_t i = 0; i < db.size(); ++i) db[i] += g * av[i];
      });
    };
    return push(std::move(n));
  }

  // ---- nonlinearities ---------------------------------------------------------

  Val relu(Val a) {
    Node n = unary_like(a);
    const auto& av = node(a).value.values;
    for (size_t i = 0; i < av.size(); ++i) n.value.values[i] = av[i] > 0.0 ? av[i] : 0.0;
    n.needs_grad = needs(a);
    n.back = [a](Tape& t, int self) {
      const auto& g = t.adj(self);
      const auto& av = t.node(a).value.values;
      t.accum(a, [&](std::vector<double>& da) {
        for (size_t i = 0; i < g.size(); ++i)
          if (av[i] > 0.0) da[i] += g[i];
      });
    };
    return push(std::move(n));
  }

  Val leaky_relu(Val a, double slope) {
    Node n = unary_like(a);
    const auto& av = node(a).value.values;
    for (size_t i = 0; i < av.size(); ++i)
      n.value.values[i] = av[i] > 0.0 ? av[i] : slope * av[i];
    n.needs_grad = needs(a);
    n.back = [a, slope](Tape& t, int self) {
      const auto& g = t.adj(self);
      const auto& av = t.node(a).value.values;
      t.accum(a, [&](std::vector<double>& da) {
        for (size_t i = 0; i < g.size(); ++i) da[i] += (av[i] > 0.0 ? 1.0 : slope) * g[i];
      });
    };
    return push(std::move(n));
  }

  Val sigmoid(Val a) {
    Node n = unary_like(a);
    const auto& av = node(a).value.values;
    for (size_t i = 0; i < av.size(); ++i) n.value.values[i] = detail::stable_sigmoid(av[i]);
    n.needs_grad = needs(a);
    n.back = [a](Tape& t, int self) {
      const auto& g = t.adj(self);
      const auto& yv = t.node(Val{self}).value.values;
      t.accum(a, [&](std::vector<double>& da) {
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] * yv[i] * (1.0 - yv[i]);
      });
    };
    return push(std::move(n));
  }

  Val logsigmoid(Val a) {
    Node n = unary_like(a);
    const auto& av = node(a).value.values;
    for (size_t i = 0; i < av.size(); ++i) n.value.values[i] = detail::stable_logsigmoid(av[i]);
    n.needs_grad = needs(a);
    n.back = [a](Tape& t, int self) {
      const auto& g = t.adj(self);
      const auto& av = t.node(a).value.values;
      t.accum(a, [&](std::vector<double>& da) {
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] * detail::stable_sigmoid(-av[i]);
      });
    };
    return push(std::move(n));
  }

  Val softplus(Val a) {
    Node n = unary_like(a);
    const auto& av = node(a).value.values;
    for (size_t i = 0; i < av.size(); ++i) n.value.values[i] = detail::stable_softplus(av[i]);
    n.needs_grad = needs(a);
    n.back = [a](Tape& t, int self) {
      const auto& g = t.adj(self);
      const auto& av = t.node(a).value.values;
      t.accum(a, [&](std::vector<double>& da) {
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] * detail::stable_sigmoid(av[i]);
      });
    };
    return push(std::move(n));
  }

  Val exp(Val a) {
    Node n = unary_like(a);
    const auto& av = node(a).value.values;
    for (size_t i = 0; i < av.size(); ++i) n.value.values[i] = std::exp(av[i]);
    n.needs_grad = needs(a);
    n.back = [a](Tape& t, int self) {
      const auto& g = t.adj(self);
      const auto& yv = t.node(Val{self}).value.values;
      t.accum(a, [&](std::vector<double>& da) {
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] * yv[i];
      });
    };
    return push(std::move(n));
  }

  Val log(Val a) {
    Node n = unary_like(a);
    const auto& av = node(a).value.values;
    for (size_t i = 0; i < av.size(); ++i) n.value.values[i] = std::log(av[i]);
    n.needs_grad = needs(a);
    n.back = [a](Tape& t, int self) {
      const auto& g = t.adj(self);
      const auto& av = t.node(a).value.values;
      t.accum(a, [&](std::vector<double>& da) {
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] / av[i];
      });
    };
    return push(std::move(n));
  }

  // ---- norms ----------------------------------------------------------------

  /// L2 norm of the flattened tensor: -> (1 x 1).
  Val l2_norm(Val a) {
    Node n;
    n.value = Tensor(1, 1);
    double acc = 0.0;
    for (double x : node(a).value.values) acc += x * x;
    const double norm = std::sqrt(acc);
    n.value.values[0] = norm;
    n.needs_grad = needs(a);
    n.back = [a, norm](Tape& t, int self) {
      const double g = t.adj(self)[0];
      const auto& av = t.node(a).value.values;
      t.accum(a, [&](std::vector<double>& da) {
        for (size_t i = 0; i < da.size(); ++i) da[i] += g * av[i] / norm;
      });
    };
    return push(std::move(n));
  }

  /// Whole-tensor normalization x / ||x||. Inputs with norm < 1e-12 signal a
  /// bug upstream and raise DegenerateInputError.
  Val unit_normalize(Val a) {
    Node n = unary_like(a);
    const auto& av = node(a).value.values;
    double acc = 0.0;
    for (double x : av) acc += x * x;
    const double norm = std::sqrt(acc);
    if (norm < 1e-12)
      throw DegenerateInputError("unit_normalize: input norm " + std::to_string(norm) +
                                 " below 1e-12");
    for (size_t i = 0; i < av.size(); ++i) n.value.values[i] = av[i] / norm;
    n.needs_grad = needs(a);
    n.back = [a, norm](Tape& t, int self) {
      const auto& g = t.adj(self);
      const auto& uv = t.node(Val{self}).value.values;
      double ug = 0.0;
      for (size_t i = 0; i < g.size(); ++i) ug += uv[i] * g[i];
      t.accum(a, [&](std::vector<double>& da) {
        for (size_t i = 0; i < g.size(); ++i) da[i] += (g[i] - uv[i] * ug) / norm;
      });
    };
    return push(std::move(n));
  }

  /// Row-wise normalization: every row scaled to unit L2 norm.
  Val normalize_rows(Val a) {
    const Tensor& A = node(a).value;
    Node n = unary_like(a);
    std::vector<double> norms(A.rows);
    for (int i = 0; i < A.rows; ++i) {
      double acc = 0.0;
      for (int j = 0; j < A.cols; ++j) acc += A.at(i, j) * A.at(i, j);
      norms[i] = std::sqrt(acc);
      if (norms[i] < 1e-12)
        throw DegenerateInputError("normalize_rows: row " + std::to_string(i) + " has norm " +
                                   std::to_string(norms[i]) + " below 1e-12");
      for (int j = 0; j < A.cols; ++j) n.value.at(i, j) = A.at(i, j) / norms[i];
    }
    n.needs_grad = needs(a);
    n.back = [a, norms = std::move(norms)](Tape& t, int self) {
      const auto& g = t.adj(self);
      const Tensor& U = t.node(Val{self}).value;
      t.accum(a, [&](std::vector<double>& da) {
        for (int i = 0; i < U.rows; ++i) {
          double ug = 0.0;
          for (int j = 0; j < U.cols; ++j)
            ug += U.at(i, j) * g[static_cast<size_t>(i) * U.cols + j];
          for (int j = 0; j < U.cols; ++j)
            da[static_cast<size_t>(i) * U.cols + j] +=
                (g[static_cast<size_t>(i) * U.cols + j] - U.at(i, j) * ug) / norms[i];
        }
      });
    };
    return push(std::move(n));
  }

  // ---- indexing ---------------------------------------------------------------

  Val gather_rows(Val a, std::vector<int> ids) {
    const Tensor& A = node(a).value;
    for (int id : ids)
      if (id < 0 || id >= A.rows)
        throw IndexError("gather_rows: row id " + std::to_string(id) + " out of [0, " +
                         std::to_string(A.rows) + ")");
    Node n;
    n.value = Tensor(static_cast<int>(ids.size()), A.cols);
    for (size_t i = 0; i < ids.size(); ++i)
      for (int j = 0; j < A.cols; ++j) n.value.at(static_cast<int>(i), j) = A.at(ids[i], j);
    n.needs_grad = needs(a);
    n.back = [a, ids = std::move(ids)](Tape& t, int self) {
      const auto& g = t.adj(self);
      const int c = t.node(a).value.cols;
      t.accum(a, [&](std::vector<double>& da) {
        for (size_t i = 0; i < ids.size(); ++i)
          for (int j = 0; j < c; ++j)
            da[static_cast<size_t>(ids[i]) * c + j] += g[i * c + j];
      });
    };
    return push(std::move(n));
  }

  Val gather_cols(Val a, std::vector<int> ids) {
    const Tensor& A = node(a).value;
    for (int id : ids)
      if (id < 0 || id >= A.cols)
        throw IndexError("gather_cols: col id " + std::to_string(id) + " out of [0, " +
                         std::to_string(A.cols) + ")");
    Node n;
    n.value = Tensor(A.rows, static_cast<int>(ids.size()));
    for (int i = 0; i < A.rows; ++i)
      for (size_t j = 0; j < ids.size(); ++j)
        n.value.at(i, static_cast<int>(j)) = A.at(i, ids[j]);
    n.needs_grad = needs(a);
    n.back = [a, ids = std::move(ids)](Tape& t, int self) {
      const auto& g = t.adj(self);
      const Tensor& A = t.node(a).value;
      const int oc = static_cast<int>(ids.size());
      t.accum(a, [&](std::vector<double>& da) {
        for (int i = 0; i < A.rows; ++i)
          for (int j = 0; j < oc; ++j)
            da[static_cast<size_t>(i) * A.cols + ids[j]] +=
                g[static_cast<size_t>(i) * oc + j];
      });
    };
    return push(std::move(n));
  }

  // ---- gradient control ---------------------------------------------------------

  /// Identity forward; the backward pass contributes exactly zero through it.
  Val stop_gradient(Val a) {
    Node n;
    if (trace_ != nullptr && trace_->replay) {
      if (trace_->cursor >= trace_->values.size())
        throw ContractError("stop_gradient: replay trace exhausted; graph structure changed");
      n.value = trace_->values[trace_->cursor++];
      check_same_shape(n.value, node(a).value, "stop_gradient replay");
    } else {
      n.value = node(a).value;
      if (trace_ != nullptr) trace_->values.push_back(n.value);
    }
    n.needs_grad = false;
    return push(std::move(n));
  }

  // ---- composites ----------------------------------------------------------------

  /// Per-row inner product against a 1 x c direction: (n x c) -> (n x 1).
  Val rowdot(Val a, Val v) { return row_sum(mul_rowvec(a, v)); }

  // ---- backward -------------------------------------------------------------------

  /// Reverse sweep from a scalar loss. Populates `grad` on every
  /// requires_grad leaf registered on this tape (zeros where no path
  /// contributes). May be called once per tape.
  void backward(Val loss) {
    const Tensor& L = node(loss).value;
    if (L.rows != 1 || L.cols != 1)
      throw ContractError("backward: loss must be 1x1, got " + L.shape_str());
    if (backward_done_)
      throw ContractError("backward: tape already differentiated; build a fresh tape");
    backward_done_ = true;

    adjoints_.assign(nodes_.size(), {});
    adjoints_[loss.id] = {1.0};
    for (int id = loss.id; id >= 0; --id) {
      Node& nd = nodes_[id];
      if (adjoints_[id].empty()) continue;  // not on a path to the loss
      if (nd.leaf != nullptr) {
        if (nd.leaf->requires_grad) {
          nd.leaf->ensure_grad();
          const auto& g = adjoints_[id];
          for (size_t i = 0; i < g.size(); ++i) nd.leaf->grad[i] += g[i];
        }
        continue;
      }
      if (nd.back) nd.back(*this, id);
    }
    // Zero-fill grads of leaves no gradient reached, so callers can read them.
    for (int id : leaf_ids_) {
      Tensor* t = nodes_[id].leaf;
      if (t->requires_grad) t->ensure_grad();
    }
    adjoints_.clear();
  }

 private:
  struct Node {
    Tensor value;
    bool needs_grad = false;
    Tensor* leaf = nullptr;
    std::function<void(Tape&, int)> back;
  };

  Node& node(Val v) { return nodes_[v.id]; }
  const Node& node(Val v) const { return nodes_[v.id]; }
  bool needs(Val v) const { return nodes_[v.id].needs_grad; }

  Node unary_like(Val a) {
    Node n;
    n.value = Tensor(node(a).value.rows, node(a).value.cols);
    return n;
  }

  void require_scalar(Val s, const char* op) const {
    const Tensor& S = node(s).value;
    if (S.rows != 1 || S.cols != 1)
      throw ShapeError(std::string(op) + ": scalar operand has shape " + S.shape_str());
  }

  Val push(Node n) {
    if (n.leaf != nullptr) leaf_ids_.push_back(static_cast<int>(nodes_.size()));
    nodes_.push_back(std::move(n));
    return Val{static_cast<int>(nodes_.size()) - 1};
  }

  // Adjoint of node `id`; valid during backward only.
  std::vector<double>& adj(int id) { return adjoints_[id]; }

  /// Runs `f` on the adjoint buffer of `v` iff `v` participates in
  /// differentiation; the buffer is zero-allocated on first touch. Skipping
  /// non-participating inputs is what makes stop_gradient contributions
  /// exactly zero rather than approximately zero.
  template <typename F>
  void accum(Val v, F&& f) {
    Node& nd = node(v);
    if (!nd.needs_grad) return;
    auto& a = adjoints_[v.id];
    if (a.empty()) a.assign(nd.value.size(), 0.0);
    f(a);
  }

  static void matmul_into(const Tensor& A, const Tensor& B, Tensor& C) {
    const int n = A.rows, m = A.cols, p = B.cols;
    std::fill(C.values.begin(), C.values.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      const double* arow = &A.values[static_cast<size_t>(i) * m];
      double* crow = &C.values[static_cast<size_t>(i) * p];
      for (int k = 0; k < m; ++k) {
        const double aik = arow[k];
        if (aik == 0.0) continue;
        const double* brow = &B.values[static_cast<size_t>(k) * p];
        for (int j = 0; j < p; ++j) crow[j] += aik * brow[j];
      }
    }
  }

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> adjoints_;
  std::vector<int> leaf_ids_;
  bool backward_done_ = false;
  SgTrace* trace_ = nullptr;
};

}  // namespace sona

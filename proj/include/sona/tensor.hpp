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

#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sona {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape mismatch between operands; message carries both shapes.
struct ShapeError : Error {
  using Error::Error;
};

// A stated precondition was violated by the caller.
struct ContractError : Error {
  using Error::Error;
};

// Out-of-range class id or row/column index.
struct IndexError : Error {
  using Error::Error;
};

// Input too close to zero for a normalization; signals a bug upstream.
struct DegenerateInputError : Error {
  using Error::Error;
};

// Non-finite value where the algorithm requires finiteness.
struct NumericError : Error {
  using Error::Error;
};

// Invalid or unparsable run configuration.
struct ConfigError : Error {
  using Error::Error;
};

/// Dense row-major matrix of doubles. Doubles as an autodiff leaf: when
/// `requires_grad` is set, backward() accumulates into `grad` (lazily
/// allocated to the same shape, zero-filled).
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;
  bool requires_grad = false;
  std::vector<double> grad;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), values(static_cast<size_t>(r) * c, 0.0) {}
  Tensor(int r, int c, std::vector<double> v) : rows(r), cols(c), values(std::move(v)) {
    if (values.size() != static_cast<size_t>(r) * c) {
      throw ShapeError("Tensor: value count " + std::to_string(values.size()) +
                       " does not match shape " + std::to_string(r) + "x" + std::to_string(c));
    }
  }

  static Tensor zeros(int r, int c) { return Tensor(r, c); }
  static Tensor full(int r, int c, double x) {
    Tensor t(r, c);
    for (auto& v : t.values) v = x;
    return t;
  }
  static Tensor scalar(double x) { return Tensor(1, 1, {x}); }

  size_t size() const { return values.size(); }
  double& at(int r, int c) { return values[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return values[static_cast<size_t>(r) * cols + c]; }

  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_str() const { return std::to_string(rows) + "x" + std::to_string(cols); }

  bool grad_allocated() const { return grad.size() == values.size(); }
  void ensure_grad() {
    if (!grad_allocated()) grad.assign(values.size(), 0.0);
  }
  void zero_grad() {
    if (grad_allocated())
      std::fill(grad.begin(), grad.end(), 0.0);
    else
      grad.clear();
  }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
  }
}

}  // namespace sona

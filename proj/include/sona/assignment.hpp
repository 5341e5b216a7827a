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

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "sona/tensor.hpp"

namespace sona {

/// Square linear assignment problem with a dense cost matrix, row-major.
struct AssignmentProblem {
  int n = 0;
  std::vector<double> cost;  // n*n

  double at(int i, int j) const { return cost[static_cast<size_t>(i) * n + j]; }
};

struct AssignmentResult {
  std::vector<int> row_to_col;
  double total_cost = 0.0;
};

/// Exact minimum-cost perfect matching via the Jonker-Volgenant algorithm:
/// column reduction, reduction transfer, two augmenting-row-reduction sweeps,
/// then shortest augmenting paths for the remaining free rows.
inline AssignmentResult solve_assignment(const AssignmentProblem& p) {
  const int n = p.n;
  if (n <= 0 || p.cost.size() != static_cast<size_t>(n) * n)
    throw ContractError("solve_assignment: cost matrix is not square (n=" + std::to_string(n) +
                        ", entries=" + std::to_string(p.cost.size()) + ")");
  for (double c : p.cost)
    if (!std::isfinite(c)) throw ContractError("solve_assignment: non-finite cost entry");

  const double INF = std::numeric_limits<double>::infinity();
  std::vector<int> rowsol(n, -1), colsol(n, -1);
  std::vector<double> v(n, 0.0);
  std::vector<int> free_rows(n, 0);
  int numfree = 0;

  // Column reduction, scanning columns in reverse.
  {
    std::vector<int> matches(n, 0);
    for (int j = n - 1; j >= 0; --j) {
      double min_c = p.at(0, j);
      int imin = 0;
      for (int i = 1; i < n; ++i) {
        const double c = p.at(i, j);
        if (c < min_c) {
          min_c = c;
          imin = i;
        }
      }
      v[j] = min_c;
      if (++matches[imin] == 1) {
        rowsol[imin] = j;
        colsol[j] = imin;
      } else {
        colsol[j] = -1;
      }
    }

    // Reduction transfer from single-assigned rows.
    for (int i = 0; i < n; ++i) {
      if (matches[i] == 0) {
        free_rows[numfree++] = i;
      } else if (matches[i] == 1 && n > 1) {
        const int j1 = rowsol[i];
        double min_r = INF;
        for (int j = 0; j < n; ++j)
          if (j != j1) min_r = std::min(min_r, p.at(i, j) - v[j]);
        v[j1] -= min_r;
      }
    }
  }

  // Augmenting row reduction, two sweeps. A heuristic: any rows it leaves
  // unassigned are handled exactly by the augmentation phase below. On
  // near-degenerate costs (tight clusters) the immediate-retake rule can
  // ping-pong with tiny potential updates, so the sweep is capped.
  for (int sweep = 0; sweep < 2; ++sweep) {
    int k = 0;
    const int prev_numfree = numfree;
    numfree = 0;
    long guard = 0;
    const long guard_limit = 2L * prev_numfree + 64;
    while (k < prev_numfree) {
      if (++guard > guard_limit) {
        while (k < prev_numfree) free_rows[numfree++] = free_rows[k++];
        break;
      }
      const int i = free_rows[k++];
      double umin = p.at(i, 0) - v[0];
      double usubmin = INF;
      int j1 = 0, j2 = -1;
      for (int j = 1; j < n; ++j) {
        const double h = p.at(i, j) - v[j];
        if (h < usubmin) {
          if (h >= umin) {
            usubmin = h;
            j2 = j;
          } else {
            usubmin = umin;
            j2 = j1;
            umin = h;
            j1 = j;
          }
        }
      }
      int i0 = colsol[j1];
      if (umin < usubmin) {
        v[j1] -= usubmin - umin;
      } else if (i0 >= 0) {
        j1 = j2;
        i0 = colsol[j1];
      }
      rowsol[i] = j1;
      colsol[j1] = i;
      if (i0 >= 0) {
        if (umin < usubmin)
          free_rows[--k] = i0;  // retake immediately
        else
          free_rows[numfree++] = i0;
      }
    }
  }

  // Shortest augmenting path for each remaining free row.
  std::vector<double> d(n);
  std::vector<int> pred(n), col(n);
  for (int f = 0; f < numfree; ++f) {
    const int freerow = free_rows[f];
    for (int j = 0; j < n; ++j) {
      d[j] = p.at(freerow, j) - v[j];
      pred[j] = freerow;
      col[j] = j;
    }
    int lo = 0, hi = 0, last = 0;
    double min_d = 0.0;
    int endofpath = -1;
    bool found = false;
    do {
      if (lo == hi) {
        last = lo - 1;
        min_d = d[col[lo]];
        hi = lo + 1;
        for (int k = hi; k < n; ++k) {
          const int j = col[k];
          const double h = d[j];
          if (h <= min_d) {
            if (h < min_d) {
              hi = lo;
              min_d = h;
            }
            col[k] = col[hi];
            col[hi++] = j;
          }
        }
        for (int k = lo; k < hi; ++k) {
          const int j = col[k];
          if (colsol[j] < 0) {
            endofpath = j;
            found = true;
            break;
          }
        }
      }
      if (!found) {
        const int j1 = col[lo++];
        const int i = colsol[j1];
        const double u1 = p.at(i, j1) - v[j1] - min_d;
        for (int k = hi; k < n; ++k) {
          const int j = col[k];
          const double h = p.at(i, j) - v[j] - u1;
          if (h < d[j]) {
            d[j] = h;
            pred[j] = i;
            if (h == min_d) {
              if (colsol[j] < 0) {
                endofpath = j;
                found = true;
                break;
              }
              col[k] = col[hi];
              col[hi++] = j;
            }
          }
        }
      }
    } while (!found);

    for (int k = 0; k <= last; ++k) {
      const int j = col[k];
      v[j] += d[j] - min_d;
    }

    int i;
    do {
      i = pred[endofpath];
      colsol[endofpath] = i;
      std::swap(rowsol[i], endofpath);
    } while (i != freerow);
  }

  AssignmentResult res;
  res.row_to_col = std::move(rowsol);
  for (int i = 0; i < n; ++i) res.total_cost += p.at(i, res.row_to_col[i]);
  return res;
}

}  // namespace sona

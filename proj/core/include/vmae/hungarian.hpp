// Copyright 2026 The vmae Authors
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

#include <utility>
#include <vector>

#include "vmae/grid.hpp"

namespace vmae {

/// Row-major cost matrix.
struct CostMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  CostMatrix() = default;
  CostMatrix(int r, int c, double fill = 0.0) : rows(r), cols(c), values(static_cast<size_t>(r) * c, fill) {}
  double& operator()(int r, int c) { return values[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return values[static_cast<size_t>(r) * cols + c]; }
};

/// Minimum-cost injective assignment of min(rows, cols) pairs (shortest
/// augmenting path, O(n^2 m)). Columns are scanned in increasing index order and
/// only strict improvements are taken, so ties resolve to the lowest index.
/// Returns (row, col) pairs sorted by row. Throws Error on non-finite costs.
std::vector<std::pair<int, int>> hungarian_match(const CostMatrix& cost);

double assignment_cost(const CostMatrix& cost, const std::vector<std::pair<int, int>>& pairs);

}  // namespace vmae

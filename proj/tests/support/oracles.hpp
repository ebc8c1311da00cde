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

// Brute-force reference implementations shared by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "vmae/grid.hpp"
#include "vmae/hungarian.hpp"
#include "vmae/rng.hpp"

namespace vmae::oracle {

inline double voxel_dist(int64_t az, int64_t ay, int64_t ax, int64_t bz, int64_t by, int64_t bx, const Spacing& s) {
  const double dz = static_cast<double>(az - bz) * s.z;
  const double dy = static_cast<double>(ay - by) * s.y;
  const double dx = static_cast<double>(ax - bx) * s.x;
  return std::sqrt(dz * dz + dy * dy + dx * dx);
}

/// O(n^2) signed distance: outside -> min over foreground voxels; inside -> minus
/// min over foreground voxels with a 6-neighbour background voxel in the grid.
inline Grid3<double> brute_signed_distance(const Mask& m, const Spacing& s) {
  const Dims d = m.dims();
  struct P {
    int64_t z, y, x;
  };
  std::vector<P> fg, boundary;
  const int64_t off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (int64_t z = 0; z < d.z; ++z) {
    for (int64_t y = 0; y < d.y; ++y) {
      for (int64_t x = 0; x < d.x; ++x) {
        if (!m(z, y, x)) continue;
        fg.push_back({z, y, x});
        for (const auto& o : off) {
          const int64_t nz = z + o[0], ny = y + o[1], nx = x + o[2];
          if (m.contains(nz, ny, nx) && !m(nz, ny, nx)) {
            boundary.push_back({z, y, x});
            break;
          }
        }
      }
    }
  }
  const double inf = std::numeric_limits<double>::infinity();
  Grid3<double> out(d, inf);
  for (int64_t z = 0; z < d.z; ++z) {
    for (int64_t y = 0; y < d.y; ++y) {
      for (int64_t x = 0; x < d.x; ++x) {
        const auto& set = m(z, y, x) ? boundary : fg;
        double best = inf;
        for (const auto& p : set) best = std::min(best, voxel_dist(z, y, x, p.z, p.y, p.x, s));
        out(z, y, x) = m(z, y, x) ? -best : best;
      }
    }
  }
  return out;
}

/// Minimum total cost over every injective assignment of min(rows, cols) pairs.
inline double brute_assignment_min(const CostMatrix& c) {
  const bool transpose = c.rows > c.cols;
  const int small = transpose ? c.cols : c.rows;
  const int big = transpose ? c.rows : c.cols;
  std::vector<int> perm(static_cast<size_t>(big));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < small; ++i) total += transpose ? c(perm[i], i) : c(i, perm[i]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

inline Mask random_mask(Dims d, double density, Rng& rng) {
  Mask m(d);
  for (auto& v : m.storage()) v = rng.uniform() < density ? 1 : 0;
  return m;
}

}  // namespace vmae::oracle

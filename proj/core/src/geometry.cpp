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

#include "vmae/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace vmae {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Felzenszwalb-Huttenlocher lower envelope for one line. `f` holds squared
// distances sampled at integer positions, `w` is the physical step between them.
class LineTransform {
 public:
  void run(std::vector<double>& f, double w) {
    const int n = static_cast<int>(f.size());
    v_.resize(n);
    z_.resize(n + 1);
    out_.resize(n);
    const double w2 = w * w;
    int k = -1;
    for (int q = 0; q < n; ++q) {
      if (!std::isfinite(f[q])) continue;
      if (k < 0) {
        k = 0;
        v_[0] = q;
        z_[0] = -kInf;
        z_[1] = kInf;
        continue;
      }
      double s = 0.0;
      while (true) {
        const int p = v_[k];
        s = ((f[q] + w2 * q * q) - (f[p] + w2 * p * p)) / (2.0 * w2 * (q - p));
        if (s <= z_[k] && k > 0) {
          --k;
          continue;
        }
        break;
      }
      if (s <= z_[k]) {
        // k == 0 and the new parabola dominates everywhere.
        v_[0] = q;
        z_[0] = -kInf;
        z_[1] = kInf;
        continue;
      }
      ++k;
      v_[k] = q;
      z_[k] = s;
      z_[k + 1] = kInf;
    }
    if (k < 0) {
      std::fill(f.begin(), f.end(), kInf);
      return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
      while (z_[j + 1] < q) ++j;
      const double d = w * (q - v_[j]);
      out_[q] = d * d + f[v_[j]];
    }
    f.swap(out_);
  }

 private:
  std::vector<int> v_;
  std::vector<double> z_;
  std::vector<double> out_;
};

void transform_axis(Grid3<double>& g, int axis, double w) {
  const Dims d = g.dims();
  const int64_t n = d[axis];
  if (n == 0) return;
  std::vector<double> line(static_cast<size_t>(n));
  LineTransform lt;
  const int a1 = axis == 0 ? 1 : 0;
  const int a2 = axis == 2 ? 1 : 2;
  for (int64_t i = 0; i < d[a1]; ++i) {
    for (int64_t j = 0; j < d[a2]; ++j) {
      auto at = [&](int64_t t) -> double& {
        Index3 idx{};
        idx[axis] = t;
        idx[a1] = i;
        idx[a2] = j;
        return g(idx[0], idx[1], idx[2]);
      };
      for (int64_t t = 0; t < n; ++t) line[t] = at(t);
      lt.run(line, w);
      for (int64_t t = 0; t < n; ++t) at(t) = line[t];
    }
  }
}

}  // namespace

Grid3<double> squared_distance_to(const Mask& seeds, const Spacing& spacing) {
  Grid3<double> g(seeds.dims(), kInf);
  for (size_t i = 0; i < seeds.size(); ++i) {
    if (seeds[i]) g[i] = 0.0;
  }
  transform_axis(g, 2, spacing.x);
  transform_axis(g, 1, spacing.y);
  transform_axis(g, 0, spacing.z);
  return g;
}

DistanceMap signed_distance_map(const Mask& mask, const Spacing& spacing) {
  const Dims d = mask.dims();
  DistanceMap out;
  out.spacing = spacing;
  out.has_artery = std::any_of(mask.storage().begin(), mask.storage().end(), [](uint8_t v) { return v != 0; });
  if (!out.has_artery) {
    out.values = Grid3<double>(d, kInf);
    return out;
  }

  Mask boundary(d, 0);
  for (int64_t z = 0; z < d.z; ++z) {
    for (int64_t y = 0; y < d.y; ++y) {
      for (int64_t x = 0; x < d.x; ++x) {
        if (!mask(z, y, x)) continue;
        const int64_t nb[6][3] = {{z - 1, y, x}, {z + 1, y, x}, {z, y - 1, x},
                                  {z, y + 1, x}, {z, y, x - 1}, {z, y, x + 1}};
        for (const auto& n : nb) {
          if (mask.contains(n[0], n[1], n[2]) && !mask(n[0], n[1], n[2])) {
            boundary(z, y, x) = 1;
            break;
          }
        }
      }
    }
  }

  const Grid3<double> outside = squared_distance_to(mask, spacing);
  const Grid3<double> inside = squared_distance_to(boundary, spacing);
  out.values = Grid3<double>(d, 0.0);
  for (size_t i = 0; i < mask.size(); ++i) {
    out.values[i] = mask[i] ? -std::sqrt(inside[i]) : std::sqrt(outside[i]);
  }
  return out;
}

std::vector<BoundingCube> mask_to_cubes(const Mask& label_mask, const Spacing& spacing) {
  const Dims d = label_mask.dims();
  std::vector<uint8_t> seen(label_mask.size(), 0);
  std::vector<BoundingCube> cubes;
  std::deque<Index3> queue;
  for (int64_t z = 0; z < d.z; ++z) {
    for (int64_t y = 0; y < d.y; ++y) {
      for (int64_t x = 0; x < d.x; ++x) {
        const size_t start = label_mask.index(z, y, x);
        if (!label_mask[start] || seen[start]) continue;
        Index3 lo{z, y, x};
        Index3 hi{z, y, x};
        seen[start] = 1;
        queue.push_back({z, y, x});
        while (!queue.empty()) {
          const Index3 c = queue.front();
          queue.pop_front();
          for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], c[a]);
            hi[a] = std::max(hi[a], c[a]);
          }
          for (int dz = -1; dz <= 1; ++dz) {
            for (int dy = -1; dy <= 1; ++dy) {
              for (int dx = -1; dx <= 1; ++dx) {
                const int64_t nz = c[0] + dz, ny = c[1] + dy, nx = c[2] + dx;
                if (!label_mask.contains(nz, ny, nx)) continue;
                const size_t ni = label_mask.index(nz, ny, nx);
                if (!label_mask[ni] || seen[ni]) continue;
                seen[ni] = 1;
                queue.push_back({nz, ny, nx});
              }
            }
          }
        }
        BoundingCube cube;
        for (int a = 0; a < 3; ++a) {
          const double s = spacing[a];
          cube.center_mm[a] = 0.5 * static_cast<double>(lo[a] + hi[a] + 1) * s;
          cube.side_mm = std::max(cube.side_mm, static_cast<double>(hi[a] - lo[a] + 1) * s);
        }
        cubes.push_back(cube);
      }
    }
  }
  return cubes;
}

double cube_iou(const BoundingCube& a, const BoundingCube& b) {
  double inter = 1.0;
  for (int k = 0; k < 3; ++k) {
    const double lo = std::max(a.center_mm[k] - 0.5 * a.side_mm, b.center_mm[k] - 0.5 * b.side_mm);
    const double hi = std::min(a.center_mm[k] + 0.5 * a.side_mm, b.center_mm[k] + 0.5 * b.side_mm);
    if (hi <= lo) return 0.0;
    inter *= hi - lo;
  }
  const double uni = a.side_mm * a.side_mm * a.side_mm + b.side_mm * b.side_mm * b.side_mm - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

float scale_distance(double distance_mm) {
  const double c = std::clamp(distance_mm, kDistanceClipLowMm, kDistanceClipHighMm);
  return static_cast<float>(c / kDistanceClipHighMm);
}

}  // namespace vmae

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

#include <vector>

#include "vmae/grid.hpp"

namespace vmae {

/// Signed Euclidean distance (mm) to the artery surface.
///
/// Outside the artery a voxel holds the distance from its centre to the nearest
/// artery voxel centre (> 0). Inside, it holds minus the distance to the nearest
/// boundary artery voxel, i.e. a foreground voxel that is 6-adjacent to an
/// in-volume background voxel, so boundary voxels are exactly 0 and deeper
/// voxels are negative. When the mask has no foreground, every value is +inf and
/// `has_artery` is false.
struct DistanceMap {
  Grid3<double> values;
  Spacing spacing;
  bool has_artery = false;
};

struct BoundingCube {
  Vec3 center_mm{};
  double side_mm = 0.0;
};

/// Exact separable EDT (lower envelope of parabolas per axis); O(voxels).
DistanceMap signed_distance_map(const Mask& mask, const Spacing& spacing);

/// Squared-distance EDT to the `seeds` set under anisotropic spacing. Non-seed
/// voxels receive the distance to the nearest seed centre; +inf if no seeds.
Grid3<double> squared_distance_to(const Mask& seeds, const Spacing& spacing);

/// 26-connected components, each turned into its tight bounding cube: the axis
/// aligned box is expanded symmetrically to side = longest extent. Components are
/// ordered by their first voxel in scan order.
std::vector<BoundingCube> mask_to_cubes(const Mask& label_mask, const Spacing& spacing);

double cube_iou(const BoundingCube& a, const BoundingCube& b);

/// Model-input scaling of a signed distance: clip to [-2, 20] mm, divide by 20.
inline constexpr double kDistanceClipLowMm = -2.0;
inline constexpr double kDistanceClipHighMm = 20.0;
float scale_distance(double distance_mm);

}  // namespace vmae

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

#include <string>
#include <vector>

#include "vmae/geometry.hpp"
#include "vmae/rng.hpp"
#include "vmae/synthvasc.hpp"

namespace vmae {

struct CropSpec {
  int64_t size = 64;   // voxels per axis
  int64_t patch = 4;   // voxels per patch edge
  int64_t channels = 2;

  [[nodiscard]] int64_t grid() const { return size / patch; }
  [[nodiscard]] int64_t n_patches() const { return grid() * grid() * grid(); }
  [[nodiscard]] int64_t voxels() const { return size * size * size; }
  void validate() const;
};

/// Two-channel sub-volume: channel 0 intensity, channel 1 scaled signed distance.
struct CropSample {
  CropSpec spec;
  std::vector<float> channels;          // [channel][z][y][x]
  Index3 origin_voxel{};                // into the parent volume
  Spacing spacing;
  double artery_fraction = 0.0;
  std::vector<float> patch_artery_frac;  // [gz][gy][gx], fraction of artery voxels per patch
  std::vector<LesionGT> gt_lesions_local;  // lesions intersecting the crop, crop-local mm

  [[nodiscard]] Vec3 extent_mm() const {
    return {spec.size * spacing.z, spec.size * spacing.y, spec.size * spacing.x};
  }
};

class NoValidCropError : public Error {
 public:
  using Error::Error;
};

struct CropPolicy {
  double min_artery_fraction = 0.10;
  int max_rejections = 1000;
  /// false: plain uniform origins without the artery-overlap predicate.
  bool require_artery_overlap = true;
};

/// Crop extraction over one case. Holds a summed-volume table of the artery mask
/// so the overlap predicate is O(1) per proposal.
class CropSampler {
 public:
  CropSampler(const Case& c, const DistanceMap& dmap, CropSpec spec = {});

  /// Uniform rejection sampling over valid origins.
  CropSample sample(Rng& rng, const CropPolicy& policy = {}) const;

  /// Crop at a fixed origin; voxels outside the volume are padded.
  CropSample extract(Index3 origin) const;

  /// Crop whose origin places `center_mm` near the middle, jittered by up to
  /// `jitter_voxels` per axis.
  CropSample around(const Vec3& center_mm, int64_t jitter_voxels, Rng& rng) const;

  [[nodiscard]] double artery_fraction_at(const Index3& origin) const;
  [[nodiscard]] const CropSpec& spec() const { return spec_; }

 private:
  [[nodiscard]] int64_t box_sum(const Index3& lo, const Index3& hi) const;

  const Case* case_;
  const DistanceMap* dmap_;
  CropSpec spec_;
  Dims dims_;
  std::vector<int64_t> table_;  // (z+1)(y+1)(x+1) inclusive prefix sums
};

CropSample sample_crop(const Case& c, const DistanceMap& dmap, Rng& rng, const CropPolicy& policy = {},
                       CropSpec spec = {});

struct MaskPlan {
  std::vector<uint8_t> masked;  // per patch, scan order
  int64_t n_masked = 0;

  /// One '0'/'1' character per patch in scan order.
  [[nodiscard]] std::string to_string() const;
};

struct MaskPolicy {
  double ratio = 0.75;
  double beta = 1.0;
  double epsilon = 0.05;
  /// Deterministic top-k by weight instead of weighted sampling (ablation only).
  bool top_k = false;
};

[[nodiscard]] int64_t masked_count(int64_t n_patches, double ratio);

/// Weighted sampling without replacement of exactly round(ratio * n) patches,
/// with weight epsilon + frac^beta, via exponential-sort keys log(u) / w.
MaskPlan plan_mask(std::span<const float> patch_artery_frac, const MaskPolicy& policy, Rng& rng);
inline MaskPlan plan_mask(const CropSample& crop, const MaskPolicy& policy, Rng& rng) {
  return plan_mask(crop.patch_artery_frac, policy, rng);
}

}  // namespace vmae

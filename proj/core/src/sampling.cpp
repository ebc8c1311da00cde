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

#include "vmae/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace vmae {

void CropSpec::validate() const {
  if (size <= 0 || patch <= 0 || size % patch != 0) {
    throw ConfigError("crop size " + std::to_string(size) + " must be a positive multiple of patch " +
                      std::to_string(patch));
  }
  if (channels != 2) throw ConfigError("crops carry exactly two channels");
}

CropSampler::CropSampler(const Case& c, const DistanceMap& dmap, CropSpec spec)
    : case_(&c), dmap_(&dmap), spec_(spec), dims_(c.artery_mask.dims()) {
  spec_.validate();
  if (dmap.values.dims() != dims_ || c.volume.dims() != dims_) throw Error("case grids and distance map dims differ");
  const int64_t sy = dims_.y + 1, sx = dims_.x + 1;
  table_.assign(static_cast<size_t>((dims_.z + 1) * sy * sx), 0);
  auto t = [&](int64_t z, int64_t y, int64_t x) -> int64_t& { return table_[static_cast<size_t>((z * sy + y) * sx + x)]; };
  for (int64_t z = 1; z <= dims_.z; ++z) {
    for (int64_t y = 1; y <= dims_.y; ++y) {
      for (int64_t x = 1; x <= dims_.x; ++x) {
        t(z, y, x) = (c.artery_mask(z - 1, y - 1, x - 1) ? 1 : 0) + t(z - 1, y, x) + t(z, y - 1, x) + t(z, y, x - 1) -
                     t(z - 1, y - 1, x) - t(z - 1, y, x - 1) - t(z, y - 1, x - 1) + t(z - 1, y - 1, x - 1);
      }
    }
  }
}

int64_t CropSampler::box_sum(const Index3& lo_in, const Index3& hi_in) const {
  // Half-open [lo, hi), clipped to the volume.
  Index3 lo{}, hi{};
  for (int a = 0; a < 3; ++a) {
    lo[a] = std::clamp<int64_t>(lo_in[a], 0, dims_[a]);
    hi[a] = std::clamp<int64_t>(hi_in[a], 0, dims_[a]);
    if (hi[a] <= lo[a]) return 0;
  }
  const int64_t sy = dims_.y + 1, sx = dims_.x + 1;
  auto t = [&](int64_t z, int64_t y, int64_t x) { return table_[static_cast<size_t>((z * sy + y) * sx + x)]; };
  return t(hi[0], hi[1], hi[2]) - t(lo[0], hi[1], hi[2]) - t(hi[0], lo[1], hi[2]) - t(hi[0], hi[1], lo[2]) +
         t(lo[0], lo[1], hi[2]) + t(lo[0], hi[1], lo[2]) + t(hi[0], lo[1], lo[2]) - t(lo[0], lo[1], lo[2]);
}

double CropSampler::artery_fraction_at(const Index3& origin) const {
  const Index3 hi{origin[0] + spec_.size, origin[1] + spec_.size, origin[2] + spec_.size};
  return static_cast<double>(box_sum(origin, hi)) / static_cast<double>(spec_.voxels());
}

CropSample CropSampler::extract(Index3 origin) const {
  CropSample s;
  s.spec = spec_;
  s.origin_voxel = origin;
  s.spacing = case_->spacing;
  s.artery_fraction = artery_fraction_at(origin);
  const int64_t n = spec_.size;
  s.channels.assign(static_cast<size_t>(2 * spec_.voxels()), 0.0f);
  const float pad_distance = scale_distance(kDistanceClipHighMm);
  for (int64_t z = 0; z < n; ++z) {
    for (int64_t y = 0; y < n; ++y) {
      for (int64_t x = 0; x < n; ++x) {
        const int64_t vz = origin[0] + z, vy = origin[1] + y, vx = origin[2] + x;
        const size_t o = static_cast<size_t>((z * n + y) * n + x);
        if (case_->volume.contains(vz, vy, vx)) {
          s.channels[o] = case_->volume(vz, vy, vx);
          s.channels[o + spec_.voxels()] = scale_distance(dmap_->values(vz, vy, vx));
        } else {
          s.channels[o + spec_.voxels()] = pad_distance;
        }
      }
    }
  }

  const int64_t g = spec_.grid(), p = spec_.patch;
  s.patch_artery_frac.resize(static_cast<size_t>(spec_.n_patches()));
  const double per_patch = static_cast<double>(p * p * p);
  for (int64_t gz = 0; gz < g; ++gz) {
    for (int64_t gy = 0; gy < g; ++gy) {
      for (int64_t gx = 0; gx < g; ++gx) {
        const Index3 lo{origin[0] + gz * p, origin[1] + gy * p, origin[2] + gx * p};
        const Index3 hi{lo[0] + p, lo[1] + p, lo[2] + p};
        s.patch_artery_frac[static_cast<size_t>((gz * g + gy) * g + gx)] =
            static_cast<float>(static_cast<double>(box_sum(lo, hi)) / per_patch);
      }
    }
  }

  const Vec3 crop_lo{origin[0] * s.spacing.z, origin[1] * s.spacing.y, origin[2] * s.spacing.x};
  const Vec3 ext = s.extent_mm();
  for (const auto& l : case_->lesions) {
    bool intersects = true;
    for (int a = 0; a < 3 && intersects; ++a) {
      const double c = l.center_mm[a] - crop_lo[a];
      intersects = c + 0.5 * l.side_mm > 0.0 && c - 0.5 * l.side_mm < ext[a];
    }
    if (!intersects) continue;
    LesionGT local = l;
    for (int a = 0; a < 3; ++a) local.center_mm[a] -= crop_lo[a];
    s.gt_lesions_local.push_back(local);
  }
  return s;
}

CropSample CropSampler::sample(Rng& rng, const CropPolicy& policy) const {
  for (int a = 0; a < 3; ++a) {
    if (dims_[a] < spec_.size) {
      throw NoValidCropError("volume " + case_->case_id + " is smaller than a " + std::to_string(spec_.size) +
                             "^3 crop");
    }
  }
  auto propose = [&]() {
    return Index3{rng.uniform_int(0, dims_.z - spec_.size), rng.uniform_int(0, dims_.y - spec_.size),
                  rng.uniform_int(0, dims_.x - spec_.size)};
  };
  if (!policy.require_artery_overlap) return extract(propose());
  if (!dmap_->has_artery || box_sum({0, 0, 0}, dims_.as_index()) == 0) {
    throw NoValidCropError("no valid crop: " + case_->case_id + " has an empty artery mask");
  }
  for (int attempt = 0; attempt < policy.max_rejections; ++attempt) {
    const Index3 o = propose();
    if (artery_fraction_at(o) >= policy.min_artery_fraction) return extract(o);
  }
  throw NoValidCropError("no valid crop: " + case_->case_id + " rejected " + std::to_string(policy.max_rejections) +
                         " proposals below artery fraction " + std::to_string(policy.min_artery_fraction));
}

CropSample CropSampler::around(const Vec3& center_mm, int64_t jitter_voxels, Rng& rng) const {
  Index3 o{};
  for (int a = 0; a < 3; ++a) {
    const auto c = static_cast<int64_t>(std::floor(center_mm[a] / case_->spacing[a]));
    const int64_t j = jitter_voxels > 0 ? rng.uniform_int(-jitter_voxels, jitter_voxels) : 0;
    o[a] = c - spec_.size / 2 + j;
    if (dims_[a] >= spec_.size) {
      o[a] = std::clamp<int64_t>(o[a], 0, dims_[a] - spec_.size);
    } else {
      o[a] = -(spec_.size - dims_[a]) / 2;
    }
  }
  return extract(o);
}

CropSample sample_crop(const Case& c, const DistanceMap& dmap, Rng& rng, const CropPolicy& policy, CropSpec spec) {
  return CropSampler(c, dmap, spec).sample(rng, policy);
}

int64_t masked_count(int64_t n_patches, double ratio) {
  return static_cast<int64_t>(std::llround(ratio * static_cast<double>(n_patches)));
}

std::string MaskPlan::to_string() const {
  std::string s(masked.size(), '0');
  for (size_t i = 0; i < masked.size(); ++i) {
    if (masked[i]) s[i] = '1';
  }
  return s;
}

MaskPlan plan_mask(std::span<const float> patch_artery_frac, const MaskPolicy& policy, Rng& rng) {
  if (!(policy.ratio > 0.0 && policy.ratio < 1.0)) {
    throw ConfigError("mask ratio must lie in (0, 1), got " + std::to_string(policy.ratio));
  }
  if (policy.epsilon < 0.0 || policy.beta < 0.0) throw ConfigError("mask epsilon and beta must be >= 0");
  const auto n = static_cast<int64_t>(patch_artery_frac.size());
  const int64_t k = masked_count(n, policy.ratio);

  std::vector<double> key(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const double f = std::clamp(static_cast<double>(patch_artery_frac[i]), 0.0, 1.0);
    const double w = policy.epsilon + (policy.beta == 0.0 ? 1.0 : std::pow(f, policy.beta));
    if (policy.top_k) {
      key[i] = w;
    } else {
      // u^(1/w) compared in log space; w == 0 never wins.
      key[i] = w > 0.0 ? std::log(rng.uniform_open0()) / w : -std::numeric_limits<double>::infinity();
    }
  }
  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) { return key[a] > key[b]; });

  MaskPlan plan;
  plan.masked.assign(static_cast<size_t>(n), 0);
  for (int64_t i = 0; i < k; ++i) plan.masked[order[i]] = 1;
  plan.n_masked = k;
  return plan;
}

}  // namespace vmae

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

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vmae/geometry.hpp"
#include "vmae/grid.hpp"

namespace vmae {

struct LesionGT {
  Vec3 center_mm{};
  double side_mm = 0.0;
  double diameter_mm = 0.0;

  [[nodiscard]] BoundingCube cube() const { return {center_mm, side_mm}; }
  bool operator==(const LesionGT&) const = default;
};

struct Case {
  std::string case_id;
  Volume volume;
  Mask artery_mask;
  Spacing spacing;
  std::vector<LesionGT> lesions;
  bool is_healthy = true;

  bool operator==(const Case&) const = default;
};

template <class T>
struct Range {
  T lo{};
  T hi{};
};

struct PhantomParams {
  Dims volume_dims{96, 96, 96};
  Spacing spacing{};
  Range<int> n_vessels{14, 20};
  Range<double> vessel_radius_mm{0.6, 1.8};
  Range<int> n_lesions{0, 2};
  Range<double> lesion_diameter_mm{2.0, 8.0};
  Range<double> vessel_intensity{0.70, 0.90};
  double background_intensity = 0.20;
  double noise_std = 0.03;
  uint64_t seed = 0;

  /// Throws ConfigError on empty ranges or dims below one 64^3 crop.
  void validate(int64_t min_dim = 64) const;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

/// Pure function of (params, case_index).
Case generate_case(const PhantomParams& params, int64_t case_index);

/// Case directory: case.json + volume.raw (f32 LE) + artery.raw (u8), z-major.
void write_case(const Case& c, const std::filesystem::path& dir);
Case read_case(const std::filesystem::path& dir);

/// Distance map sidecar pair: distance.json + distance.raw (f32 LE).
void write_distance_map(const DistanceMap& dmap, const std::filesystem::path& dir);
DistanceMap read_distance_map(const std::filesystem::path& dir);

/// Newline-delimited case directories relative to the manifest location.
void write_manifest(const std::filesystem::path& manifest, const std::vector<std::string>& relative_dirs);
std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& manifest);

}  // namespace vmae

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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "vmae/synthvasc.hpp"

using namespace vmae;
namespace fs = std::filesystem;

namespace {

PhantomParams small_params(uint64_t seed = 3) {
  PhantomParams p;
  p.volume_dims = {64, 64, 64};
  p.seed = seed;
  return p;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vmae_synth_" + name);
  fs::remove_all(p);
  return p;
}

double min_dist_to_mask(const Case& c, const Vec3& p) {
  const Dims d = c.artery_mask.dims();
  double best = 1e300;
  for (int64_t z = 0; z < d.z; ++z) {
    for (int64_t y = 0; y < d.y; ++y) {
      for (int64_t x = 0; x < d.x; ++x) {
        if (!c.artery_mask(z, y, x)) continue;
        const double dz = voxel_center_mm(z, c.spacing.z) - p[0];
        const double dy = voxel_center_mm(y, c.spacing.y) - p[1];
        const double dx = voxel_center_mm(x, c.spacing.x) - p[2];
        best = std::min(best, dz * dz + dy * dy + dx * dx);
      }
    }
  }
  return std::sqrt(best);
}

}  // namespace

TEST(GenerateCase, Deterministic) {
  const auto p = small_params();
  EXPECT_EQ(generate_case(p, 4), generate_case(p, 4));
  EXPECT_FALSE(generate_case(p, 4) == generate_case(p, 5));
}

TEST(GenerateCase, HealthyWhenNoLesionsRequested) {
  auto p = small_params();
  p.n_lesions = {0, 0};
  const Case c = generate_case(p, 0);
  EXPECT_TRUE(c.is_healthy);
  EXPECT_TRUE(c.lesions.empty());
}

TEST(GenerateCase, InvariantsHold) {
  auto p = small_params();
  p.n_lesions = {1, 2};
  for (int64_t i = 0; i < 6; ++i) {
    const Case c = generate_case(p, i);
    EXPECT_EQ(c.volume.dims(), c.artery_mask.dims());
    EXPECT_EQ(c.is_healthy, c.lesions.empty());
    EXPECT_EQ(c.case_id.size(), 10u);
    for (float v : c.volume.values()) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
    for (const auto& l : c.lesions) {
      EXPECT_GT(l.diameter_mm, 0.0);
      EXPECT_GE(l.side_mm, l.diameter_mm - c.spacing.x);
      for (int a = 0; a < 3; ++a) {
        const double extent = static_cast<double>(c.volume.dims()[a]) * c.spacing[a];
        EXPECT_GE(l.center_mm[a] - l.side_mm / 2, 0.0);
        EXPECT_LE(l.center_mm[a] + l.side_mm / 2, extent);
      }
    }
  }
}

TEST(GenerateCase, LesionsAttachToArteries) {
  auto p = small_params(9);
  p.n_lesions = {2, 2};
  int checked = 0;
  for (int64_t i = 0; checked < 1000; ++i) {
    const Case c = generate_case(p, i);
    for (const auto& l : c.lesions) {
      ASSERT_LE(min_dist_to_mask(c, l.center_mm), c.spacing.x + 1e-9) << c.case_id;
      ++checked;
    }
  }
}

TEST(GenerateCase, RejectsTooSmallVolume) {
  auto p = small_params();
  p.volume_dims = {8, 8, 8};
  EXPECT_THROW(generate_case(p, 0), GenerationError);
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(GenerateCase, RejectsEmptyRanges) {
  auto p = small_params();
  p.vessel_radius_mm = {2.0, 1.0};
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(CaseIo, RoundTrip) {
  auto p = small_params();
  p.n_lesions = {1, 2};
  const Case c = generate_case(p, 2);
  const fs::path dir = scratch("roundtrip");
  write_case(c, dir);
  EXPECT_EQ(read_case(dir), c);
  fs::remove_all(dir);
}

TEST(CaseIo, TruncatedPayloadNamesByteCounts) {
  const Case c = generate_case(small_params(), 0);
  const fs::path dir = scratch("truncated");
  write_case(c, dir);
  fs::resize_file(dir / "volume.raw", 1000);
  try {
    read_case(dir);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("1048576"), std::string::npos) << msg;
    EXPECT_NE(msg.find("1000"), std::string::npos) << msg;
  }
  fs::remove_all(dir);
}

TEST(CaseIo, SixtyFourCubedPayloadAccepted) {
  Case c;
  c.case_id = "case_00042";
  c.volume = Volume({64, 64, 64}, 0.5f);
  c.artery_mask = Mask({64, 64, 64});
  const fs::path dir = scratch("sixtyfour");
  write_case(c, dir);
  EXPECT_EQ(fs::file_size(dir / "volume.raw"), 1048576u);
  EXPECT_EQ(read_case(dir), c);
  fs::remove_all(dir);
}

TEST(CaseIo, MalformedSidecar) {
  const fs::path dir = scratch("malformed");
  write_case(generate_case(small_params(), 0), dir);
  std::ofstream(dir / "case.json") << "{\"case_id\": 3";
  EXPECT_THROW(read_case(dir), FormatError);
  fs::remove_all(dir);
}

TEST(CaseIo, DistanceMapRoundTrip) {
  const Case c = generate_case(small_params(), 1);
  const DistanceMap dm = signed_distance_map(c.artery_mask, c.spacing);
  const fs::path dir = scratch("distance");
  write_distance_map(dm, dir);
  const DistanceMap back = read_distance_map(dir);
  EXPECT_EQ(back.has_artery, dm.has_artery);
  for (size_t i = 0; i < dm.values.size(); i += 97) {
    EXPECT_EQ(back.values[i], static_cast<double>(static_cast<float>(dm.values[i])));
  }
  fs::remove_all(dir);
}

TEST(Manifest, RelativePathsResolveAgainstManifestDir) {
  const fs::path dir = scratch("manifest");
  fs::create_directories(dir);
  write_manifest(dir / "m.txt", {"a", "b/c"});
  std::ofstream(dir / "m.txt", std::ios::app) << "# comment\n\n";
  const auto paths = read_manifest(dir / "m.txt");
  ASSERT_EQ(paths.size(), 2u);
  EXPECT_EQ(paths[0], dir / "a");
  EXPECT_EQ(paths[1], dir / "b/c");
  fs::remove_all(dir);
}

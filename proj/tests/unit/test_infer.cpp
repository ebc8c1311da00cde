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

#include "vmae/infer.hpp"

using namespace vmae;
using namespace vmae::nn;

TEST(WindowOrigins, ExactFit) { EXPECT_EQ(window_origins(64, 64, 32), std::vector<int64_t>{0}); }

TEST(WindowOrigins, TwentySevenWindowsFor128Cubed) {
  const auto o = window_origins(128, 64, 32);
  EXPECT_EQ(o, (std::vector<int64_t>{0, 32, 64}));
  EXPECT_EQ(o.size() * o.size() * o.size(), 27u);
}

TEST(WindowOrigins, LastWindowClampedToEdge) {
  EXPECT_EQ(window_origins(96, 64, 32), (std::vector<int64_t>{0, 32}));
  EXPECT_EQ(window_origins(100, 64, 32), (std::vector<int64_t>{0, 32, 36}));
}

TEST(WindowOrigins, SmallVolumeGetsCentredPaddedWindow) {
  EXPECT_EQ(window_origins(48, 64, 32), std::vector<int64_t>{-8});
}

TEST(DecodeWindow, WorldCoordinates) {
  auto logits = torch::tensor({0.0});
  auto centers = torch::tensor({0.5, 0.25, 1.0}).view({1, 3});
  auto log_side = torch::tensor({std::log(2.0)});
  const auto d = decode_window(logits, centers, log_side, {32, 0, 10}, Spacing{}, 64);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_NEAR(d[0].score, 0.5, 1e-12);
  EXPECT_NEAR(d[0].center_mm[0], (32 + 32) * 0.4, 1e-6);
  EXPECT_NEAR(d[0].center_mm[1], 16 * 0.4, 1e-6);
  EXPECT_NEAR(d[0].center_mm[2], (10 + 64) * 0.4, 1e-6);
  EXPECT_NEAR(d[0].side_mm, 2.0, 1e-6);
}

TEST(SlidingWindow, DuplicateAcrossWindowsSuppressed) {
  // One object seen from two overlapping windows decodes to nearly the same cube.
  const auto a = decode_window(torch::tensor({2.0}), torch::tensor({0.75, 0.5, 0.5}).view({1, 3}),
                               torch::tensor({std::log(3.0)}), {0, 0, 0}, Spacing{}, 64);
  const auto b = decode_window(torch::tensor({1.0}), torch::tensor({0.26, 0.5, 0.5}).view({1, 3}),
                               torch::tensor({std::log(3.0)}), {32, 0, 0}, Spacing{}, 64);
  std::vector<Detection> all = {a[0], b[0]};
  const auto kept = nms(all, 0.25);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0], a[0]);
}

TEST(SlidingWindow, SingleWindowCase) {
  PhantomParams p;
  p.volume_dims = {64, 64, 64};
  const Case c = generate_case(p, 0);
  const DistanceMap dm = signed_distance_map(c.artery_mask, c.spacing);
  VmaeModel model(ModelConfig::desk());
  const CasePredictions preds = sliding_window_infer(model, c, dm);
  EXPECT_EQ(preds.case_id, c.case_id);
  EXPECT_LE(preds.detections.size(), 8u);
  EXPECT_GE(preds.detections.size(), 1u);
  for (size_t i = 0; i < preds.detections.size(); ++i) {
    EXPECT_GE(preds.detections[i].score, 0.0);
    EXPECT_LE(preds.detections[i].score, 1.0);
    EXPECT_GT(preds.detections[i].side_mm, 0.0);
    if (i) EXPECT_LE(preds.detections[i].score, preds.detections[i - 1].score);
  }
}

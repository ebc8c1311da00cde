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

#include <torch/torch.h>

#include "vmae/evaluation.hpp"
#include "vmae/model.hpp"
#include "vmae/sampling.hpp"

namespace vmae::nn {

struct InferConfig {
  int64_t stride = 32;
  double nms_iou = 0.25;
  /// Detections below this score are dropped before suppression.
  double min_score = 0.0;
  int64_t batch_size = 4;
};

/// Window origins along one axis. A window that does not fit yields one origin
/// centring the padded window on the axis.
std::vector<int64_t> window_origins(int64_t extent, int64_t window, int64_t stride);

/// Decodes one window's query outputs to world-mm detections.
std::vector<Detection> decode_window(const torch::Tensor& logits, const torch::Tensor& centers,
                                     const torch::Tensor& log_side, const Index3& origin_voxel,
                                     const Spacing& spacing, int64_t crop_size);

/// Whole-volume detection: windows over the grid of origins, decoded and merged
/// by greedy suppression.
CasePredictions sliding_window_infer(VmaeModel& model, const Case& c, const DistanceMap& dmap,
                                     const InferConfig& cfg = {});

}  // namespace vmae::nn

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

#include "vmae/infer.hpp"

#include <algorithm>
#include <cstring>

namespace vmae::nn {

std::vector<int64_t> window_origins(int64_t extent, int64_t window, int64_t stride) {
  if (window <= 0 || stride <= 0) throw ConfigError("window and stride must be positive");
  if (extent <= window) return {-((window - extent) / 2)};
  const int64_t n = (extent - window + stride - 1) / stride + 1;
  std::vector<int64_t> out;
  for (int64_t i = 0; i < n; ++i) out.push_back(std::min(i * stride, extent - window));
  return out;
}

std::vector<Detection> decode_window(const torch::Tensor& logits, const torch::Tensor& centers,
                                     const torch::Tensor& log_side, const Index3& origin_voxel,
                                     const Spacing& spacing, int64_t crop_size) {
  auto p = torch::sigmoid(logits).to(torch::kFloat64).contiguous();
  auto c = centers.to(torch::kFloat64).contiguous();
  auto s = log_side.exp().to(torch::kFloat64).contiguous();
  const double sp[3] = {spacing.z, spacing.y, spacing.x};
  std::vector<Detection> out;
  for (int64_t q = 0; q < p.size(0); ++q) {
    Detection d;
    d.score = p[q].item<double>();
    for (int a = 0; a < 3; ++a) {
      d.center_mm[a] = (static_cast<double>(origin_voxel[a]) + static_cast<double>(crop_size) * c[q][a].item<double>()) * sp[a];
    }
    d.side_mm = s[q].item<double>();
    out.push_back(d);
  }
  return out;
}

CasePredictions sliding_window_infer(VmaeModel& model, const Case& c, const DistanceMap& dmap,
                                     const InferConfig& cfg) {
  const ModelConfig& mc = model->config();
  const int64_t w = mc.crop_size();
  const CropSampler sampler(c, dmap, CropSpec{w, mc.patch, 2});
  const Dims d = c.volume.dims();
  const auto oz = window_origins(d.z, w, cfg.stride);
  const auto oy = window_origins(d.y, w, cfg.stride);
  const auto ox = window_origins(d.x, w, cfg.stride);
  std::vector<Index3> origins;
  for (int64_t z : oz) {
    for (int64_t y : oy) {
      for (int64_t x : ox) origins.push_back({z, y, x});
    }
  }

  torch::NoGradGuard no_grad;
  const bool was_training = model->is_training();
  model->eval();
  std::vector<Detection> all;
  const auto bs = static_cast<size_t>(std::max<int64_t>(1, cfg.batch_size));
  for (size_t start = 0; start < origins.size(); start += bs) {
    const size_t stop = std::min(origins.size(), start + bs);
    auto batch = torch::empty({static_cast<int64_t>(stop - start), 2, w, w, w}, torch::kFloat32);
    for (size_t i = start; i < stop; ++i) {
      const CropSample crop = sampler.extract(origins[i]);
      std::memcpy(batch[static_cast<int64_t>(i - start)].data_ptr<float>(), crop.channels.data(),
                  crop.channels.size() * sizeof(float));
    }
    const auto b = batch.size(0);
    auto enc = model->encoder->forward(patchify(batch, mc.patch), full_coords(b, mc.n_tokens()));
    const DetectionOutput out = model->detector->forward(enc);
    for (int64_t r = 0; r < b; ++r) {
      for (const auto& det : decode_window(out.logits[r], out.centers[r], out.log_side[r],
                                           origins[start + static_cast<size_t>(r)], c.spacing, w)) {
        if (det.score >= cfg.min_score) all.push_back(det);
      }
    }
  }
  if (was_training) model->train();

  CasePredictions preds;
  preds.case_id = c.case_id;
  preds.detections = nms(std::move(all), cfg.nms_iou);
  preds.sort_by_score();
  return preds;
}

}  // namespace vmae::nn

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

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "vmae/model.hpp"
#include "vmae/sampling.hpp"

namespace vmae::train {

struct PretrainConfig {
  int64_t epochs = 100;
  double lr_start = 1.5e-3;
  double lr_end = 1.5e-4;
  double weight_decay = 0.05;
  int64_t batch_size = 2;
  uint64_t seed = 0;
  int64_t crops_per_case = 1;
  MaskPolicy mask{};
  /// Artery-overlap crop predicate ("Sampl." in the ablation table).
  bool biased_sampling = true;
  /// Distance channel as input and reconstruction target ("Reco."). When off the
  /// channel is zeroed at the input and left out of the loss.
  bool reconstruct_distance = true;
  double min_artery_fraction = 0.10;

  void validate() const;
};

struct FinetuneConfig {
  int64_t epochs = 50;
  double lr = 1e-4;
  double weight_decay = 0.05;
  double multi_match_radius_mm = 1.0;
  int64_t batch_size = 2;
  uint64_t seed = 0;
  int64_t crops_per_case = 1;
  /// Share of crops centred (with jitter) on a ground-truth lesion.
  double positive_fraction = 0.5;
  int64_t jitter_voxels = 24;

  void validate() const;
};

/// Cosine decay from `start` at epoch 0 to `end` at epoch `epochs - 1`.
double cosine_lr(double start, double end, int64_t epoch, int64_t epochs);

struct MaeLoss {
  torch::Tensor total;
  torch::Tensor intensity;
  torch::Tensor distance;
};

/// MSE over masked tokens only. `reconstruction` and `target` are [B, N, 2*p^3]
/// (channel-major per token), `masked` is [B, N] bool. Throws Error when a row
/// does not mask exactly `expected_masked` tokens.
MaeLoss mae_loss(const torch::Tensor& reconstruction, const torch::Tensor& target, const torch::Tensor& masked,
                 int64_t expected_masked, bool reconstruct_distance = true);

/// Ground truth in crop-normalised coordinates.
struct GtBox {
  Vec3 center_norm{};
  double side_mm = 0.0;
};

struct MatchResult {
  std::vector<std::pair<int, int>> pairs;           // (query, gt), Hungarian
  std::vector<std::pair<int, int>> extra_positive;  // (query, gt), within radius
  std::vector<int> unmatched_queries;               // background
};

/// Hungarian assignment on centre distance (mm), then every unpaired query whose
/// centre lies strictly within `radius_mm` of its nearest GT becomes an extra
/// positive for that GT.
MatchResult match_queries(const std::vector<Vec3>& query_centers_norm, const std::vector<GtBox>& gts,
                          const Vec3& extent_mm, double radius_mm);

struct DetectionLoss {
  torch::Tensor total;
  torch::Tensor bce;
  torch::Tensor center;
  torch::Tensor size;
  torch::Tensor iou;
  std::vector<MatchResult> matches;
};

/// Mean of BCE (all queries), centre MSE, log-size MSE and (IoU - 1)^2 over the
/// positives; BCE alone for samples without positives. Averaged over the batch.
DetectionLoss detection_loss(const nn::DetectionOutput& out, const std::vector<std::vector<GtBox>>& gts,
                             const Vec3& extent_mm, const FinetuneConfig& cfg);

/// Lesions whose centre lies inside the crop, normalised to [0, 1)^3.
std::vector<GtBox> crop_targets(const CropSample& crop);

/// Stacks crops into [B, 2, S, S, S].
torch::Tensor crops_to_tensor(const std::vector<CropSample>& crops);

struct StepLog {
  int64_t epoch = 0;
  int64_t step = 0;
  std::vector<double> values;
};

struct TrainResult {
  std::vector<StepLog> steps;
  std::vector<double> epoch_mean_loss;
  int64_t skipped_crops = 0;
};

/// MAE pre-training over the manifest's cases. Writes a CSV log
/// (epoch,step,loss,loss_intensity,loss_distance) and an encoder+decoder
/// checkpoint when the paths are non-empty.
TrainResult pretrain(const std::vector<std::filesystem::path>& cases, const nn::ModelConfig& model_cfg,
                     const PretrainConfig& cfg, const std::filesystem::path& checkpoint_out,
                     const std::filesystem::path& log_csv, const std::string& config_echo = "");

/// Detection fine-tuning. With `init_checkpoint` the encoder is loaded from it
/// (the MAE decoder is ignored); without, training starts from scratch. Log
/// columns: epoch,step,loss,bce,center,size,iou.
TrainResult finetune(const std::vector<std::filesystem::path>& cases, const nn::ModelConfig& model_cfg,
                     const std::optional<std::filesystem::path>& init_checkpoint, const FinetuneConfig& cfg,
                     const std::filesystem::path& checkpoint_out, const std::filesystem::path& log_csv,
                     const std::string& config_echo = "");

}  // namespace vmae::train

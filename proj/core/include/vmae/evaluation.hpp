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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vmae/geometry.hpp"
#include "vmae/synthvasc.hpp"

namespace vmae {

/// A detection in world coordinates.
struct Detection {
  double score = 0.0;
  Vec3 center_mm{};
  double side_mm = 0.0;

  [[nodiscard]] BoundingCube cube() const { return {center_mm, side_mm}; }
  bool operator==(const Detection&) const = default;
};

struct CasePredictions {
  std::string case_id;
  std::vector<Detection> detections;  // score-descending

  void sort_by_score();
};

/// Greedy score-ordered suppression: a detection is dropped when its cube IoU
/// with an already kept detection exceeds `iou_threshold`.
std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold);

/// Per-case outcome of matching predictions to ground truth.
struct LabeledCase {
  std::string case_id;
  std::vector<Detection> detections;   // score-descending
  std::vector<uint8_t> is_tp;          // per detection
  std::vector<int> claimed_gt;         // per detection, -1 for FP
  std::vector<LesionGT> gts;
  std::vector<double> gt_hit_score;    // per GT, score of the claiming detection or -inf

  [[nodiscard]] bool healthy() const { return gts.empty(); }
};

/// Score-descending greedy claim: a detection is TP when its best IoU over the
/// still unclaimed GTs is >= t_iou.
LabeledCase match_detections(const CasePredictions& preds, const std::vector<LesionGT>& gts, double t_iou = 0.3);

struct FrocPoint {
  double threshold = 0.0;
  double fpr = 0.0;  // mean FPs per scan
  double se = 0.0;   // lesion sensitivity
};

struct FrocCurve {
  std::vector<FrocPoint> points;  // threshold-descending, fpr non-decreasing
  int64_t n_scans = 0;
  int64_t n_lesions = 0;
};

/// Sweep over every distinct detection score. Throws Error when the evaluation
/// set holds no lesions.
FrocCurve froc(const std::vector<LabeledCase>& cases);

/// Max sensitivity over points with fpr <= budget (0 if none).
double se_at_fpr(const FrocCurve& curve, double fpr_budget = 0.5);

/// The point realising se_at_fpr; its threshold is the operating threshold. When
/// no point fits the budget the returned threshold is +inf.
FrocPoint operating_point(const FrocCurve& curve, double fpr_budget = 0.5);

struct PatientMetrics {
  std::optional<double> p_se;  // absent without lesion-bearing cases
  std::optional<double> p_sp;  // absent without healthy cases
  int64_t diseased_detected = 0;
  int64_t diseased_total = 0;
  int64_t healthy_clean = 0;
  int64_t healthy_total = 0;
};

PatientMetrics patient_metrics(const std::vector<LabeledCase>& cases, double threshold);

/// Sensitivity per diameter band [0,e0), [e0,e1), [e1,inf); absent = no lesions.
std::array<std::optional<double>, 3> strata_sensitivity(const std::vector<LabeledCase>& cases, double threshold,
                                                        std::array<double, 2> edges = {3.0, 7.0});

/// Hit flags for every GT (case order, then GT order) at a score threshold.
std::vector<uint8_t> lesion_hits(const std::vector<LabeledCase>& cases, double threshold);

/// Two-sided paired sign-flip permutation test on the mean hit difference,
/// p = (1 + #{|T_perm| >= |T_obs|}) / (1 + n_perm).
double permutation_test(const std::vector<uint8_t>& hits_a, const std::vector<uint8_t>& hits_b, int64_t n_perm = 10000,
                        uint64_t seed = 0);

void write_predictions(const std::filesystem::path& path, const std::vector<CasePredictions>& preds,
                       const std::string& config_echo_json = "");
std::vector<CasePredictions> read_predictions(const std::filesystem::path& path);

}  // namespace vmae

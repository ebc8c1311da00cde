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
#include <vector>

#include "experiment_config.hpp"
#include "vmae/evaluation.hpp"

namespace vmae::cli {

namespace fs = std::filesystem;

struct SynthResult {
  fs::path train_manifest;
  fs::path test_manifest;
  int64_t n_train = 0;
  int64_t n_test = 0;
};

/// Writes case_XXXXX directories (case + distance map), train.txt with the first
/// n_cases - holdout cases, test.txt with the rest, and config.json. Refuses a
/// non-empty out_dir unless `force`.
SynthResult synthesize(const ExperimentConfig& cfg, int64_t n_cases, int64_t holdout, const fs::path& out_dir,
                       bool force, int workers = 1);

train::TrainResult run_pretrain(const ExperimentConfig& cfg, const fs::path& manifest, const fs::path& checkpoint,
                                const fs::path& log_csv);
train::TrainResult run_finetune(const ExperimentConfig& cfg, const fs::path& manifest,
                                const std::optional<fs::path>& init, const fs::path& checkpoint,
                                const fs::path& log_csv);

std::vector<CasePredictions> run_infer(const ExperimentConfig& cfg, const fs::path& checkpoint,
                                       const std::vector<fs::path>& case_dirs);

struct SetReport {
  std::string label;
  FrocCurve curve;
  double se_at_budget = 0.0;
  double threshold = 0.0;
  PatientMetrics patient;
  std::array<std::optional<double>, 3> strata;
  std::vector<uint8_t> hits;
};

struct PairwiseP {
  std::string a;
  std::string b;
  double p = 1.0;
};

struct EvalReport {
  std::vector<SetReport> sets;
  std::vector<PairwiseP> pairs;
};

/// Ground truth for the cases of a manifest, keyed in manifest order.
struct GroundTruth {
  std::vector<std::string> case_ids;
  std::vector<std::vector<LesionGT>> lesions;
};
GroundTruth load_ground_truth(const std::vector<fs::path>& case_dirs);

EvalReport evaluate(const ExperimentConfig& cfg, const GroundTruth& gt,
                    const std::vector<std::pair<std::string, std::vector<CasePredictions>>>& sets);

/// metrics.json, metrics.csv, froc_<label>.csv and froc.svg under out_dir.
void write_eval_report(const EvalReport& report, const ExperimentConfig& cfg, const fs::path& out_dir);

/// Self-contained SVG: FPs per scan 0..2 on x, sensitivity 0..1 on y.
std::string render_froc_svg(const std::vector<std::pair<std::string, FrocCurve>>& curves);

struct AblationVariant {
  std::string name;
  bool pretrain = true;
  bool reconstruct_distance = true;
  bool biased_masking = true;
  bool biased_sampling = true;
};

/// Cumulative ablation rows in report order.
std::vector<AblationVariant> ablation_variants(bool reduced);

/// Trains, infers and evaluates every variant with identical seeds, writing
/// per-variant artefacts plus ablation.json / ablation.csv under out_dir.
EvalReport run_ablation(const ExperimentConfig& cfg, const fs::path& out_dir, bool reduced);

/// Thread count for torch and, on glibc, allocator thresholds that keep large
/// activation buffers on the heap instead of fresh mappings per step.
void configure_runtime(int workers);

/// Refuses to replace an existing file unless `force`.
void guard_output(const fs::path& path, bool force);

std::string format_double(double v);

}  // namespace vmae::cli

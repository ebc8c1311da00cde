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
#include <string>

#include <json.hpp>

#include "vmae/infer.hpp"
#include "vmae/model.hpp"
#include "vmae/synthvasc.hpp"
#include "vmae/training.hpp"

namespace vmae::cli {

struct EvalConfig {
  double t_iou = 0.3;
  double fpr_budget = 0.5;
  std::array<double, 2> strata_edges{3.0, 7.0};
  int64_t n_perm = 10000;
};

struct IoConfig {
  std::filesystem::path data_dir = "data";
  std::filesystem::path train_manifest = "data/train.txt";
  std::filesystem::path test_manifest = "data/test.txt";
  std::filesystem::path work_dir = "runs";
};

struct ExperimentConfig {
  uint64_t seed = 0;
  PhantomParams phantom;
  nn::ModelConfig model;
  train::PretrainConfig pretrain;
  train::FinetuneConfig finetune;
  nn::InferConfig infer;
  EvalConfig eval;
  IoConfig io;

  /// Pushes the top-level seed into every section that carries one.
  void propagate_seed();
  void validate() const;
  [[nodiscard]] nlohmann::json to_json() const;
};

/// Defaults, then the file (if any), then VMAE__SECTION__KEY environment
/// overrides. Values of overrides are parsed as JSON, falling back to a string.
/// Unknown sections or keys are rejected.
ExperimentConfig load_config(const std::filesystem::path& path = {});
void apply_json(ExperimentConfig& cfg, const nlohmann::json& j);
void apply_env_overrides(ExperimentConfig& cfg, char** envp);

inline constexpr const char* kEnvPrefix = "VMAE__";

}  // namespace vmae::cli

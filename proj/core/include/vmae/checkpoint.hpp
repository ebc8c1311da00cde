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
#include <string>
#include <vector>

#include <torch/torch.h>

#include "vmae/model.hpp"

namespace vmae::nn {

class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// Container layout (all little-endian):
///   "VMAECKPT" | u32 version | u32 header_len | header JSON
///   | u32 n_tensors | n x (u32 name_len | name | u32 ndim | i64 dims[ndim] | f32 data)
/// The header echoes the model config under "model" plus caller metadata.
inline constexpr uint32_t kCheckpointVersion = 1;

/// Writes every parameter whose name starts with one of `prefixes` (all when empty).
void save_checkpoint(const std::filesystem::path& path, torch::nn::Module& module, const ModelConfig& cfg,
                     const std::string& kind, const std::string& extra_json = "",
                     const std::vector<std::string>& prefixes = {});

struct CheckpointHeader {
  ModelConfig config;
  std::string kind;
  std::string raw_json;
};

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path);

/// Loads parameters matching `prefixes` into `module`. Fails on config mismatch,
/// a missing parameter or a shape mismatch.
CheckpointHeader load_checkpoint(const std::filesystem::path& path, torch::nn::Module& module,
                                 const ModelConfig& expected, const std::vector<std::string>& prefixes = {});

}  // namespace vmae::nn

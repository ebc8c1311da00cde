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
#include <string>
#include <vector>

#include <torch/torch.h>

#include "vmae/grid.hpp"

namespace vmae::nn {

struct ModelConfig {
  int64_t depth = 2;
  int64_t dim = 64;
  int64_t heads_spatial = 8;
  int64_t heads_axial = 8;
  int64_t patch = 4;
  int64_t grid = 16;
  int64_t in_channels = 2;
  int64_t n_queries = 8;
  int64_t det_heads = 8;
  int64_t decoder_depth = 2;
  int64_t decoder_dim = 64;
  int64_t mlp_ratio = 4;
  /// 0: axial step attends the whole (y, x) column; w > 0: only slices within +-w.
  int64_t axial_window = 0;

  /// Encoder of six layers at width 384 with a matching decoder.
  static ModelConfig paper();
  static ModelConfig desk() { return {}; }

  [[nodiscard]] int64_t n_tokens() const { return grid * grid * grid; }
  [[nodiscard]] int64_t patch_values() const { return in_channels * patch * patch * patch; }
  [[nodiscard]] int64_t crop_size() const { return grid * patch; }
  void validate() const;
  [[nodiscard]] std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  bool operator==(const ModelConfig&) const = default;
};

/// Parameter-free 3D sine/cosine table, one row per token in scan order. Each
/// axis gets 2*floor(dim/6) channels (sines then cosines); leftover channels are
/// zero. Throws ConfigError when dim < 6.
torch::Tensor sinusoidal_position_3d(Dims grid, int64_t dim);

/// [B, C, S, S, S] -> [B, N, C * p^3]; values ordered (channel, pz, py, px).
torch::Tensor patchify(const torch::Tensor& volumes, int64_t patch);
torch::Tensor unpatchify(const torch::Tensor& patches, int64_t patch, int64_t channels, int64_t grid);

/// Largest single attention matrix seen since the last reset (rows * cols),
/// counted per group and per head. Thread-local.
struct AttentionStats {
  int64_t peak_elements = 0;
  int64_t matrices = 0;
  void record(int64_t rows, int64_t cols) {
    peak_elements = std::max(peak_elements, rows * cols);
    ++matrices;
  }
  void reset() { *this = {}; }
};
AttentionStats& attention_stats();

enum class GroupAxis { kSlice, kColumn };

/// Index plan for ragged grouped attention over a token list. Slice groups share
/// z; column groups share (y, x). Groups are padded to the largest size S in the
/// batch; padded slots point at a trailing zero row.
struct GroupLayout {
  int64_t batch = 0;
  int64_t groups = 0;
  int64_t group_size = 0;
  torch::Tensor gather;   // [B*G*S] into the flattened [B*L] token rows (+1 pad row)
  torch::Tensor valid;    // [B*G, S] bool
  torch::Tensor scatter;  // [B*L] into the flattened [B*G*S] group slots
  torch::Tensor allowed;  // optional [B*G, S, S] bool, windowed column attention
};

GroupLayout make_group_layout(const torch::Tensor& coords, Dims grid, GroupAxis axis, int64_t window = 0);

/// Token list with scan-order coordinates; `x` is [B, L, D], `cls` [B, 1, D].
struct Tokens {
  torch::Tensor x;
  torch::Tensor cls;
  torch::Tensor coords;  // [B, L] int64, sorted ascending per row
};

/// Pre-norm attention + feed-forward residual block restricted to one grouping.
/// The CLS token is an extra key/value in every group and queries all tokens.
class FactorizedBlockImpl : public torch::nn::Module {
 public:
  FactorizedBlockImpl(int64_t dim, int64_t heads, int64_t mlp_ratio);
  Tokens forward(const Tokens& in, const GroupLayout& layout);

 private:
  int64_t dim_;
  int64_t heads_;
  torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr};
  torch::nn::Linear qkv_{nullptr}, proj_{nullptr}, fc1_{nullptr}, fc2_{nullptr};
};
TORCH_MODULE(FactorizedBlock);

/// Slice step followed by column step.
class FactorizedLayerImpl : public torch::nn::Module {
 public:
  FactorizedLayerImpl(int64_t dim, int64_t heads_spatial, int64_t heads_axial, int64_t mlp_ratio);
  Tokens forward(const Tokens& in, const GroupLayout& slices, const GroupLayout& columns);

  FactorizedBlock spatial{nullptr};
  FactorizedBlock axial{nullptr};
};
TORCH_MODULE(FactorizedLayer);

struct Layouts {
  GroupLayout slices;
  GroupLayout columns;
};
Layouts make_layouts(const torch::Tensor& coords, const ModelConfig& cfg);

class EncoderImpl : public torch::nn::Module {
 public:
  explicit EncoderImpl(const ModelConfig& cfg);
  /// `patches` [B, L, C*p^3] with `coords` [B, L]; input order is irrelevant,
  /// the output is in ascending coordinate order.
  Tokens forward(const torch::Tensor& patches, const torch::Tensor& coords);

  [[nodiscard]] const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  torch::nn::Linear embed_{nullptr};
  torch::Tensor cls_;
  torch::Tensor pos_;
  torch::nn::ModuleList layers_{nullptr};
  torch::nn::LayerNorm norm_{nullptr};
};
TORCH_MODULE(Encoder);

class MaeDecoderImpl : public torch::nn::Module {
 public:
  explicit MaeDecoderImpl(const ModelConfig& cfg);
  /// Reassembles the full grid (mask token at missing coordinates) and returns
  /// [B, N, C*p^3] raw reconstructions.
  torch::Tensor forward(const Tokens& encoded);
  /// Full-grid decoder input before the decoder layers (for inspection).
  torch::Tensor assemble(const Tokens& encoded);

 private:
  ModelConfig cfg_;
  torch::nn::Linear embed_{nullptr};
  torch::Tensor mask_token_;
  torch::Tensor pos_;
  torch::nn::ModuleList layers_{nullptr};
  torch::nn::LayerNorm norm_{nullptr};
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(MaeDecoder);

struct DetectionOutput {
  torch::Tensor logits;    // [B, Q]
  torch::Tensor centers;   // [B, Q, 3] crop-normalised (z, y, x) in [0, 1]
  torch::Tensor log_side;  // [B, Q] log of cube side in mm
};

/// Learned queries: cross-attention over encoder tokens (+CLS), self-attention
/// among queries, feed-forward, then class / centre / size MLP heads.
class DetectionHeadImpl : public torch::nn::Module {
 public:
  explicit DetectionHeadImpl(const ModelConfig& cfg);
  DetectionOutput forward(const Tokens& encoded);

  /// Shape of the last query self-attention matrix (rows, cols).
  [[nodiscard]] std::pair<int64_t, int64_t> last_self_attention_shape() const { return last_self_shape_; }

 private:
  ModelConfig cfg_;
  torch::Tensor queries_;
  torch::Tensor pos_;
  torch::nn::LayerNorm norm_q_{nullptr}, norm_kv_{nullptr}, norm_self_{nullptr}, norm_ffn_{nullptr};
  torch::nn::Linear cross_q_{nullptr}, cross_k_{nullptr}, cross_v_{nullptr}, cross_out_{nullptr};
  torch::nn::Linear self_qkv_{nullptr}, self_out_{nullptr};
  torch::nn::Linear fc1_{nullptr}, fc2_{nullptr};
  torch::nn::Sequential class_head_{nullptr}, center_head_{nullptr}, size_head_{nullptr};
  std::pair<int64_t, int64_t> last_self_shape_{0, 0};
};
TORCH_MODULE(DetectionHead);

class VmaeModelImpl : public torch::nn::Module {
 public:
  explicit VmaeModelImpl(const ModelConfig& cfg);

  Encoder encoder{nullptr};
  MaeDecoder decoder{nullptr};
  DetectionHead detector{nullptr};

  [[nodiscard]] const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
};
TORCH_MODULE(VmaeModel);

/// Scaled dot-product attention over [B, H, Lq, dh] x [B, H, Lk, dh]; `key_mask`
/// broadcastable to [B, H, Lq, Lk], false entries are excluded.
torch::Tensor attend(const torch::Tensor& q, const torch::Tensor& k, const torch::Tensor& v,
                     const torch::Tensor& key_mask = {});

/// All token coordinates 0..N-1 repeated over the batch.
torch::Tensor full_coords(int64_t batch, int64_t n_tokens);

}  // namespace vmae::nn

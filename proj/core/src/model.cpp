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

#include "vmae/model.hpp"

#include <cmath>

#include <json.hpp>

namespace vmae::nn {
using nlohmann::json;

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.depth = 6;
  c.dim = 384;
  c.decoder_depth = 6;
  c.decoder_dim = 384;
  return c;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("model config: " + m); };
  if (depth < 1) fail("depth must be >= 1");
  if (decoder_depth < 0) fail("decoder_depth must be >= 0");
  if (dim < 6 || decoder_dim < 6) fail("dim and decoder_dim must be >= 6 for the 3D sinusoidal encoding");
  if (heads_spatial < 1 || heads_axial < 1 || det_heads < 1) fail("head counts must be >= 1");
  if (dim % heads_spatial != 0 || dim % heads_axial != 0) fail("dim must be divisible by both head counts");
  if (decoder_dim % heads_spatial != 0 || decoder_dim % heads_axial != 0) fail("decoder_dim must be divisible by head counts");
  if (dim % det_heads != 0) fail("dim must be divisible by det_heads");
  if (patch < 1 || grid < 1 || in_channels < 1) fail("patch, grid and in_channels must be >= 1");
  if (n_queries < 1) fail("n_queries must be >= 1");
  if (mlp_ratio < 1) fail("mlp_ratio must be >= 1");
  if (axial_window < 0) fail("axial_window must be >= 0");
}

std::string ModelConfig::to_json() const {
  json j{{"depth", depth},         {"dim", dim},
         {"heads_spatial", heads_spatial}, {"heads_axial", heads_axial},
         {"patch", patch},         {"grid", grid},
         {"in_channels", in_channels}, {"n_queries", n_queries},
         {"det_heads", det_heads}, {"decoder_depth", decoder_depth},
         {"decoder_dim", decoder_dim}, {"mlp_ratio", mlp_ratio},
         {"axial_window", axial_window}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  ModelConfig c;
  const json j = json::parse(text);
  auto get = [&](const char* key, int64_t& field) {
    if (j.contains(key)) field = j.at(key).get<int64_t>();
  };
  get("depth", c.depth);
  get("dim", c.dim);
  get("heads_spatial", c.heads_spatial);
  get("heads_axial", c.heads_axial);
  get("patch", c.patch);
  get("grid", c.grid);
  get("in_channels", c.in_channels);
  get("n_queries", c.n_queries);
  get("det_heads", c.det_heads);
  get("decoder_depth", c.decoder_depth);
  get("decoder_dim", c.decoder_dim);
  get("mlp_ratio", c.mlp_ratio);
  get("axial_window", c.axial_window);
  return c;
}

torch::Tensor sinusoidal_position_3d(Dims grid, int64_t dim) {
  if (dim < 6) throw ConfigError("positional encoding needs dim >= 6, got " + std::to_string(dim));
  const int64_t width = 2 * (dim / 6);
  const int64_t half = width / 2;
  const int64_t n = grid.count();
  auto table = torch::zeros({n, dim}, torch::kFloat64);
  auto acc = table.accessor<double, 2>();
  for (int64_t z = 0; z < grid.z; ++z) {
    for (int64_t y = 0; y < grid.y; ++y) {
      for (int64_t x = 0; x < grid.x; ++x) {
        const int64_t row = (z * grid.y + y) * grid.x + x;
        const int64_t pos[3] = {z, y, x};
        for (int a = 0; a < 3; ++a) {
          for (int64_t i = 0; i < half; ++i) {
            const double freq = std::pow(10000.0, -static_cast<double>(2 * i) / static_cast<double>(width));
            acc[row][a * width + i] = std::sin(static_cast<double>(pos[a]) * freq);
            acc[row][a * width + half + i] = std::cos(static_cast<double>(pos[a]) * freq);
          }
        }
      }
    }
  }
  return table.to(torch::kFloat32);
}

torch::Tensor patchify(const torch::Tensor& volumes, int64_t patch) {
  TORCH_CHECK(volumes.dim() == 5, "patchify expects [B, C, S, S, S]");
  const int64_t b = volumes.size(0), c = volumes.size(1), s = volumes.size(2);
  TORCH_CHECK(s % patch == 0 && volumes.size(3) == s && volumes.size(4) == s, "crop must be cubic and divisible by patch");
  const int64_t g = s / patch;
  return volumes.reshape({b, c, g, patch, g, patch, g, patch})
      .permute({0, 2, 4, 6, 1, 3, 5, 7})
      .reshape({b, g * g * g, c * patch * patch * patch});
}

torch::Tensor unpatchify(const torch::Tensor& patches, int64_t patch, int64_t channels, int64_t grid) {
  const int64_t b = patches.size(0);
  return patches.reshape({b, grid, grid, grid, channels, patch, patch, patch})
      .permute({0, 4, 1, 5, 2, 6, 3, 7})
      .reshape({b, channels, grid * patch, grid * patch, grid * patch});
}

AttentionStats& attention_stats() {
  thread_local AttentionStats stats;
  return stats;
}

GroupLayout make_group_layout(const torch::Tensor& coords, Dims grid, GroupAxis axis, int64_t window) {
  auto c = coords.to(torch::kCPU, torch::kLong).contiguous();
  const int64_t b = c.size(0), l = c.size(1);
  const int64_t plane = grid.y * grid.x;
  const int64_t g = axis == GroupAxis::kSlice ? grid.z : plane;
  auto group_of = [&](int64_t coord) { return axis == GroupAxis::kSlice ? coord / plane : coord % plane; };

  const int64_t* cp = c.data_ptr<int64_t>();
  std::vector<int64_t> counts(static_cast<size_t>(b * g), 0);
  for (int64_t i = 0; i < b * l; ++i) {
    TORCH_CHECK(cp[i] >= 0 && cp[i] < grid.count(), "token coordinate out of range");
    ++counts[static_cast<size_t>((i / l) * g + group_of(cp[i]))];
  }
  int64_t s = 1;
  for (int64_t n : counts) s = std::max(s, n);

  GroupLayout out;
  out.batch = b;
  out.groups = g;
  out.group_size = s;
  auto gather = torch::full({b * g * s}, b * l, torch::kLong);
  auto valid = torch::zeros({b * g, s}, torch::kBool);
  auto scatter = torch::empty({b * l}, torch::kLong);
  auto* gp = gather.data_ptr<int64_t>();
  auto* vp = valid.data_ptr<bool>();
  auto* sp = scatter.data_ptr<int64_t>();
  std::vector<int64_t> fill(static_cast<size_t>(b * g), 0);
  std::vector<int64_t> slot_z(static_cast<size_t>(b * g * s), 0);
  for (int64_t bi = 0; bi < b; ++bi) {
    for (int64_t li = 0; li < l; ++li) {
      const int64_t coord = cp[bi * l + li];
      const int64_t grp = bi * g + group_of(coord);
      const int64_t flat = grp * s + fill[static_cast<size_t>(grp)]++;
      gp[flat] = bi * l + li;
      vp[flat] = true;
      sp[bi * l + li] = flat;
      slot_z[static_cast<size_t>(flat)] = coord / plane;
    }
  }
  out.gather = gather;
  out.valid = valid;
  out.scatter = scatter;
  if (axis == GroupAxis::kColumn && window > 0) {
    auto allowed = torch::zeros({b * g, s, s}, torch::kBool);
    auto ap = allowed.accessor<bool, 3>();
    for (int64_t grp = 0; grp < b * g; ++grp) {
      for (int64_t i = 0; i < s; ++i) {
        for (int64_t j = 0; j < s; ++j) {
          const int64_t zi = slot_z[static_cast<size_t>(grp * s + i)];
          const int64_t zj = slot_z[static_cast<size_t>(grp * s + j)];
          ap[grp][i][j] = std::llabs(zi - zj) <= window;
        }
      }
    }
    out.allowed = allowed;
  }
  return out;
}

Layouts make_layouts(const torch::Tensor& coords, const ModelConfig& cfg) {
  const Dims grid{cfg.grid, cfg.grid, cfg.grid};
  return {make_group_layout(coords, grid, GroupAxis::kSlice),
          make_group_layout(coords, grid, GroupAxis::kColumn, cfg.axial_window)};
}

torch::Tensor attend(const torch::Tensor& q, const torch::Tensor& k, const torch::Tensor& v,
                     const torch::Tensor& key_mask) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.size(-1)));
  auto scores = torch::matmul(q, k.transpose(-2, -1)) * scale;
  if (key_mask.defined()) scores = scores.masked_fill(key_mask.logical_not(), -std::numeric_limits<double>::infinity());
  return torch::matmul(torch::softmax(scores, -1), v);
}

torch::Tensor full_coords(int64_t batch, int64_t n_tokens) {
  return torch::arange(n_tokens, torch::kLong).unsqueeze(0).expand({batch, n_tokens}).contiguous();
}

FactorizedBlockImpl::FactorizedBlockImpl(int64_t dim, int64_t heads, int64_t mlp_ratio) : dim_(dim), heads_(heads) {
  norm1_ = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  qkv_ = register_module("qkv", torch::nn::Linear(dim, 3 * dim));
  proj_ = register_module("proj", torch::nn::Linear(dim, dim));
  norm2_ = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  fc1_ = register_module("fc1", torch::nn::Linear(dim, mlp_ratio * dim));
  fc2_ = register_module("fc2", torch::nn::Linear(mlp_ratio * dim, dim));
}

Tokens FactorizedBlockImpl::forward(const Tokens& in, const GroupLayout& layout) {
  const int64_t b = in.x.size(0), l = in.x.size(1);
  const int64_t h = heads_, dh = dim_ / heads_;
  const int64_t g = layout.groups, s = layout.group_size;

  auto qkv = qkv_(norm1_(in.x)).view({b, l, 3, h, dh});
  auto cqkv = qkv_(norm1_(in.cls)).view({b, 1, 3, h, dh});

  // Group tokens: [B*L (+pad), H, dh] -> [B*G, H, S, dh].
  auto group = [&](const torch::Tensor& t) {
    auto flat = torch::cat({t.reshape({b * l, h, dh}), torch::zeros({1, h, dh}, t.options())}, 0);
    return flat.index_select(0, layout.gather).view({b * g, s, h, dh}).permute({0, 2, 1, 3});
  };
  auto per_group_cls = [&](const torch::Tensor& t) {  // [B,1,H,dh] -> [B*G, H, 1, dh]
    return t.repeat_interleave(g, 0).permute({0, 2, 1, 3});
  };
  auto q = qkv.select(2, 0), k = qkv.select(2, 1), v = qkv.select(2, 2);
  auto cq = cqkv.select(2, 0), ck = cqkv.select(2, 1), cv = cqkv.select(2, 2);

  auto keys = torch::cat({group(k), per_group_cls(ck)}, 2);
  auto values = torch::cat({group(v), per_group_cls(cv)}, 2);
  auto key_mask = torch::cat({layout.valid, torch::ones({b * g, 1}, torch::kBool)}, 1).view({b * g, 1, 1, s + 1});
  if (layout.allowed.defined()) {
    auto allowed = torch::cat({layout.allowed, torch::ones({b * g, s, 1}, torch::kBool)}, 2).unsqueeze(1);
    key_mask = key_mask.logical_and(allowed);
  }
  auto grouped = attend(group(q), keys, values, key_mask);  // [B*G, H, S, dh]
  auto tokens_out = grouped.permute({0, 2, 1, 3}).reshape({b * g * s, dim_}).index_select(0, layout.scatter);
  tokens_out = tokens_out.view({b, l, dim_});
  attention_stats().record(s, s + 1);

  // CLS queries every token of the list plus itself.
  auto all_k = torch::cat({k, ck}, 1).permute({0, 2, 1, 3});
  auto all_v = torch::cat({v, cv}, 1).permute({0, 2, 1, 3});
  auto cls_out = attend(cq.permute({0, 2, 1, 3}), all_k, all_v).permute({0, 2, 1, 3}).reshape({b, 1, dim_});
  attention_stats().record(1, l + 1);

  Tokens out;
  out.coords = in.coords;
  out.x = in.x + proj_(tokens_out);
  out.cls = in.cls + proj_(cls_out);
  out.x = out.x + fc2_(torch::gelu(fc1_(norm2_(out.x))));
  out.cls = out.cls + fc2_(torch::gelu(fc1_(norm2_(out.cls))));
  return out;
}

FactorizedLayerImpl::FactorizedLayerImpl(int64_t dim, int64_t heads_spatial, int64_t heads_axial, int64_t mlp_ratio) {
  spatial = register_module("spatial", FactorizedBlock(dim, heads_spatial, mlp_ratio));
  axial = register_module("axial", FactorizedBlock(dim, heads_axial, mlp_ratio));
}

Tokens FactorizedLayerImpl::forward(const Tokens& in, const GroupLayout& slices, const GroupLayout& columns) {
  return axial->forward(spatial->forward(in, slices), columns);
}

EncoderImpl::EncoderImpl(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  embed_ = register_module("embed", torch::nn::Linear(cfg.patch_values(), cfg.dim));
  cls_ = register_parameter("cls", torch::randn({1, 1, cfg.dim}) * 0.02);
  pos_ = register_buffer("pos", sinusoidal_position_3d({cfg.grid, cfg.grid, cfg.grid}, cfg.dim));
  layers_ = register_module("layers", torch::nn::ModuleList());
  for (int64_t i = 0; i < cfg.depth; ++i) {
    layers_->push_back(FactorizedLayer(cfg.dim, cfg.heads_spatial, cfg.heads_axial, cfg.mlp_ratio));
  }
  norm_ = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg.dim})));
}

Tokens EncoderImpl::forward(const torch::Tensor& patches, const torch::Tensor& coords) {
  const int64_t b = patches.size(0), l = patches.size(1);
  auto [sorted, order] = coords.sort(1);
  auto ordered = patches.gather(1, order.unsqueeze(-1).expand({b, l, patches.size(2)}));

  Tokens t;
  t.coords = sorted.contiguous();
  t.x = embed_(ordered) + pos_.index_select(0, t.coords.flatten()).view({b, l, cfg_.dim});
  t.cls = cls_.expand({b, 1, cfg_.dim});
  const Layouts layouts = make_layouts(t.coords, cfg_);
  for (const auto& m : *layers_) {
    t = m->as<FactorizedLayer>()->forward(t, layouts.slices, layouts.columns);
  }
  t.x = norm_(t.x);
  t.cls = norm_(t.cls);
  return t;
}

MaeDecoderImpl::MaeDecoderImpl(const ModelConfig& cfg) : cfg_(cfg) {
  embed_ = register_module("embed", torch::nn::Linear(cfg.dim, cfg.decoder_dim));
  mask_token_ = register_parameter("mask_token", torch::randn({1, 1, cfg.decoder_dim}) * 0.02);
  pos_ = register_buffer("pos", sinusoidal_position_3d({cfg.grid, cfg.grid, cfg.grid}, cfg.decoder_dim));
  layers_ = register_module("layers", torch::nn::ModuleList());
  for (int64_t i = 0; i < cfg.decoder_depth; ++i) {
    layers_->push_back(FactorizedLayer(cfg.decoder_dim, cfg.heads_spatial, cfg.heads_axial, cfg.mlp_ratio));
  }
  norm_ = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg.decoder_dim})));
  head_ = register_module("head", torch::nn::Linear(cfg.decoder_dim, cfg.patch_values()));
}

torch::Tensor MaeDecoderImpl::assemble(const Tokens& encoded) {
  const int64_t b = encoded.x.size(0), l = encoded.x.size(1), n = cfg_.n_tokens(), d = cfg_.decoder_dim;
  auto emb = embed_(encoded.x);
  auto full = mask_token_.expand({b, n, d}).scatter(1, encoded.coords.unsqueeze(-1).expand({b, l, d}), emb);
  return full + pos_.unsqueeze(0);
}

torch::Tensor MaeDecoderImpl::forward(const Tokens& encoded) {
  const int64_t b = encoded.x.size(0);
  Tokens t;
  t.x = assemble(encoded);
  t.cls = embed_(encoded.cls);
  t.coords = full_coords(b, cfg_.n_tokens());
  if (!layers_->is_empty()) {
    const Layouts layouts = make_layouts(t.coords, cfg_);
    for (const auto& m : *layers_) {
      t = m->as<FactorizedLayer>()->forward(t, layouts.slices, layouts.columns);
    }
  }
  return head_(norm_(t.x));
}

namespace {
torch::nn::Sequential mlp_head(int64_t dim, int64_t out) {
  return torch::nn::Sequential(torch::nn::Linear(dim, dim), torch::nn::GELU(), torch::nn::Linear(dim, out));
}
}  // namespace

DetectionHeadImpl::DetectionHeadImpl(const ModelConfig& cfg) : cfg_(cfg) {
  const int64_t d = cfg.dim;
  queries_ = register_parameter("queries", torch::randn({cfg.n_queries, d}));
  pos_ = register_buffer("pos", sinusoidal_position_3d({cfg.grid, cfg.grid, cfg.grid}, d));
  norm_q_ = register_module("norm_q", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})));
  norm_kv_ = register_module("norm_kv", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})));
  cross_q_ = register_module("cross_q", torch::nn::Linear(d, d));
  cross_k_ = register_module("cross_k", torch::nn::Linear(d, d));
  cross_v_ = register_module("cross_v", torch::nn::Linear(d, d));
  cross_out_ = register_module("cross_out", torch::nn::Linear(d, d));
  norm_self_ = register_module("norm_self", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})));
  self_qkv_ = register_module("self_qkv", torch::nn::Linear(d, 3 * d));
  self_out_ = register_module("self_out", torch::nn::Linear(d, d));
  norm_ffn_ = register_module("norm_ffn", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})));
  fc1_ = register_module("fc1", torch::nn::Linear(d, cfg.mlp_ratio * d));
  fc2_ = register_module("fc2", torch::nn::Linear(cfg.mlp_ratio * d, d));
  class_head_ = register_module("class_head", mlp_head(d, 1));
  center_head_ = register_module("center_head", mlp_head(d, 3));
  size_head_ = register_module("size_head", mlp_head(d, 1));
  {
    torch::NoGradGuard no_grad;
    // Start near a 5 mm cube and a low prior for the lesion class.
    auto last_size = size_head_[2]->as<torch::nn::Linear>();
    last_size->bias.fill_(std::log(5.0));
    auto last_class = class_head_[2]->as<torch::nn::Linear>();
    last_class->bias.fill_(-2.0);
  }
}

DetectionOutput DetectionHeadImpl::forward(const Tokens& encoded) {
  const int64_t b = encoded.x.size(0), l = encoded.x.size(1), d = cfg_.dim;
  const int64_t h = cfg_.det_heads, dh = d / h, nq = cfg_.n_queries;
  // Positions enter the keys only; values carry encoder content.
  auto memory = norm_kv_(torch::cat({encoded.x, encoded.cls}, 1));
  auto pos = torch::cat({pos_.index_select(0, encoded.coords.flatten()).view({b, l, d}),
                         torch::zeros({b, 1, d}, memory.options())},
                        1);

  auto heads = [&](const torch::Tensor& t) { return t.view({b, t.size(1), h, dh}).permute({0, 2, 1, 3}); };
  auto merge = [&](const torch::Tensor& t) { return t.permute({0, 2, 1, 3}).reshape({b, t.size(2), d}); };

  auto q = queries_.unsqueeze(0).expand({b, nq, d});
  q = q + cross_out_(merge(attend(heads(cross_q_(norm_q_(q))), heads(cross_k_(memory + pos)), heads(cross_v_(memory)))));

  auto qkv = self_qkv_(norm_self_(q)).chunk(3, -1);
  q = q + self_out_(merge(attend(heads(qkv[0]), heads(qkv[1]), heads(qkv[2]))));
  last_self_shape_ = {nq, nq};

  q = q + fc2_(torch::gelu(fc1_(norm_ffn_(q))));

  DetectionOutput out;
  out.logits = class_head_->forward(q).squeeze(-1);
  out.centers = torch::sigmoid(center_head_->forward(q));
  out.log_side = size_head_->forward(q).squeeze(-1);
  return out;
}

VmaeModelImpl::VmaeModelImpl(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  encoder = register_module("encoder", Encoder(cfg));
  decoder = register_module("decoder", MaeDecoder(cfg));
  detector = register_module("detector", DetectionHead(cfg));
}

}  // namespace vmae::nn

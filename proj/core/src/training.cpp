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

#include "vmae/training.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numbers>
#include <numeric>

#include "vmae/checkpoint.hpp"
#include "vmae/hungarian.hpp"

namespace vmae::train {
namespace fs = std::filesystem;

void PretrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("pretrain.epochs must be >= 1");
  if (!(lr_start >= lr_end && lr_end > 0.0)) throw ConfigError("pretrain requires lr_start >= lr_end > 0");
  if (weight_decay < 0.0) throw ConfigError("pretrain.weight_decay must be >= 0");
  if (batch_size < 1 || crops_per_case < 1) throw ConfigError("pretrain batch_size and crops_per_case must be >= 1");
  if (!(mask.ratio > 0.0 && mask.ratio < 1.0)) throw ConfigError("pretrain.mask_ratio must lie in (0, 1)");
}

void FinetuneConfig::validate() const {
  if (epochs < 1) throw ConfigError("finetune.epochs must be >= 1");
  if (lr <= 0.0) throw ConfigError("finetune.lr must be > 0");
  if (weight_decay < 0.0) throw ConfigError("finetune.weight_decay must be >= 0");
  if (multi_match_radius_mm <= 0.0) throw ConfigError("finetune.multi_match_radius_mm must be > 0");
  if (batch_size < 1 || crops_per_case < 1) throw ConfigError("finetune batch_size and crops_per_case must be >= 1");
  if (positive_fraction < 0.0 || positive_fraction > 1.0) throw ConfigError("finetune.positive_fraction must be in [0,1]");
}

double cosine_lr(double start, double end, int64_t epoch, int64_t epochs) {
  if (epochs <= 1) return start;
  const double t = static_cast<double>(std::clamp<int64_t>(epoch, 0, epochs - 1)) / static_cast<double>(epochs - 1);
  return end + 0.5 * (start - end) * (1.0 + std::cos(std::numbers::pi * t));
}

MaeLoss mae_loss(const torch::Tensor& reconstruction, const torch::Tensor& target, const torch::Tensor& masked,
                 int64_t expected_masked, bool reconstruct_distance) {
  TORCH_CHECK(reconstruction.sizes() == target.sizes(), "reconstruction and target shapes differ");
  TORCH_CHECK(masked.dim() == 2 && masked.size(0) == target.size(0) && masked.size(1) == target.size(1),
              "mask must be [B, N]");
  auto counts = masked.to(torch::kLong).sum(1);
  for (int64_t b = 0; b < counts.size(0); ++b) {
    const int64_t c = counts[b].item<int64_t>();
    if (c != expected_masked) {
      throw Error("mae_loss: mask plan covers " + std::to_string(c) + " tokens, expected " +
                  std::to_string(expected_masked));
    }
  }
  const int64_t per_channel = target.size(2) / 2;
  auto err = (reconstruction - target).pow(2);
  auto weight = masked.to(err.dtype()).unsqueeze(-1);
  const double denom = static_cast<double>(expected_masked * counts.size(0) * per_channel);
  MaeLoss loss;
  loss.intensity = (err.narrow(2, 0, per_channel) * weight).sum() / denom;
  loss.distance = (err.narrow(2, per_channel, per_channel) * weight).sum() / denom;
  loss.total = reconstruct_distance ? 0.5 * (loss.intensity + loss.distance) : loss.intensity;
  return loss;
}

MatchResult match_queries(const std::vector<Vec3>& query_centers_norm, const std::vector<GtBox>& gts,
                          const Vec3& extent_mm, double radius_mm) {
  const int nq = static_cast<int>(query_centers_norm.size());
  const int ng = static_cast<int>(gts.size());
  MatchResult r;
  auto dist_mm = [&](int q, int g) {
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double d = (query_centers_norm[q][a] - gts[g].center_norm[a]) * extent_mm[a];
      d2 += d * d;
    }
    return std::sqrt(d2);
  };
  std::vector<char> positive(nq, 0);
  if (ng > 0) {
    CostMatrix cost(ng, nq);
    for (int g = 0; g < ng; ++g) {
      for (int q = 0; q < nq; ++q) cost(g, q) = dist_mm(q, g);
    }
    for (const auto& [g, q] : hungarian_match(cost)) {
      r.pairs.emplace_back(q, g);
      positive[q] = 1;
    }
    std::sort(r.pairs.begin(), r.pairs.end());
    for (int q = 0; q < nq; ++q) {
      if (positive[q]) continue;
      int best = 0;
      for (int g = 1; g < ng; ++g) {
        if (dist_mm(q, g) < dist_mm(q, best)) best = g;
      }
      if (dist_mm(q, best) < radius_mm) {
        r.extra_positive.emplace_back(q, best);
        positive[q] = 1;
      }
    }
  }
  for (int q = 0; q < nq; ++q) {
    if (!positive[q]) r.unmatched_queries.push_back(q);
  }
  return r;
}

DetectionLoss detection_loss(const nn::DetectionOutput& out, const std::vector<std::vector<GtBox>>& gts,
                             const Vec3& extent_mm, const FinetuneConfig& cfg) {
  const int64_t batch = out.logits.size(0), nq = out.logits.size(1);
  TORCH_CHECK(static_cast<int64_t>(gts.size()) == batch, "one ground-truth list per batch row");
  const auto opts = out.logits.options();
  auto centers_cpu = out.centers.detach().to(torch::kCPU, torch::kFloat64).contiguous();
  auto extent = torch::tensor({extent_mm[0], extent_mm[1], extent_mm[2]}, opts);

  DetectionLoss loss;
  std::vector<torch::Tensor> totals, bces, centers, sizes, ious;
  for (int64_t b = 0; b < batch; ++b) {
    std::vector<Vec3> qc(static_cast<size_t>(nq));
    auto acc = centers_cpu.accessor<double, 3>();
    for (int64_t q = 0; q < nq; ++q) qc[q] = {acc[b][q][0], acc[b][q][1], acc[b][q][2]};
    MatchResult m = match_queries(qc, gts[b], extent_mm, cfg.multi_match_radius_mm);

    std::vector<int64_t> pos_q, pos_g;
    for (const auto& [q, g] : m.pairs) pos_q.push_back(q), pos_g.push_back(g);
    for (const auto& [q, g] : m.extra_positive) pos_q.push_back(q), pos_g.push_back(g);

    auto labels = torch::zeros({nq}, opts);
    for (int64_t q : pos_q) labels[q] = 1.0;
    auto bce = torch::binary_cross_entropy_with_logits(out.logits[b], labels);
    auto zero = torch::zeros({}, opts);
    if (pos_q.empty()) {
      totals.push_back(bce);
      bces.push_back(bce);
      centers.push_back(zero);
      sizes.push_back(zero);
      ious.push_back(zero);
    } else {
      const auto n = static_cast<int64_t>(pos_q.size());
      auto qi = torch::tensor(pos_q, torch::kLong);
      auto gt_c = torch::empty({n, 3}, opts);
      auto gt_s = torch::empty({n}, opts);
      for (int64_t i = 0; i < n; ++i) {
        const GtBox& g = gts[b][static_cast<size_t>(pos_g[i])];
        for (int a = 0; a < 3; ++a) gt_c[i][a] = g.center_norm[a];
        gt_s[i] = g.side_mm;
      }
      auto pc = out.centers[b].index_select(0, qi);
      auto pls = out.log_side[b].index_select(0, qi);
      auto center_term = torch::mse_loss(pc, gt_c);
      auto size_term = torch::mse_loss(pls, gt_s.log());

      auto ps = pls.exp().unsqueeze(-1);
      auto p_mm = pc * extent;
      auto g_mm = gt_c * extent;
      auto gs = gt_s.unsqueeze(-1);
      auto lo = torch::maximum(p_mm - 0.5 * ps, g_mm - 0.5 * gs);
      auto hi = torch::minimum(p_mm + 0.5 * ps, g_mm + 0.5 * gs);
      auto inter = (hi - lo).clamp_min(0.0).prod(-1);
      auto uni = ps.squeeze(-1).pow(3) + gs.squeeze(-1).pow(3) - inter;
      auto iou = inter / uni;
      auto iou_term = (iou - 1.0).pow(2).mean();

      totals.push_back(0.25 * (bce + center_term + size_term + iou_term));
      bces.push_back(bce);
      centers.push_back(center_term);
      sizes.push_back(size_term);
      ious.push_back(iou_term);
    }
    loss.matches.push_back(std::move(m));
  }
  loss.total = torch::stack(totals).mean();
  loss.bce = torch::stack(bces).mean();
  loss.center = torch::stack(centers).mean();
  loss.size = torch::stack(sizes).mean();
  loss.iou = torch::stack(ious).mean();
  return loss;
}

std::vector<GtBox> crop_targets(const CropSample& crop) {
  std::vector<GtBox> out;
  const Vec3 ext = crop.extent_mm();
  for (const auto& l : crop.gt_lesions_local) {
    GtBox g;
    bool inside = true;
    for (int a = 0; a < 3; ++a) {
      g.center_norm[a] = l.center_mm[a] / ext[a];
      inside = inside && g.center_norm[a] >= 0.0 && g.center_norm[a] < 1.0;
    }
    g.side_mm = l.side_mm;
    if (inside) out.push_back(g);
  }
  return out;
}

torch::Tensor crops_to_tensor(const std::vector<CropSample>& crops) {
  TORCH_CHECK(!crops.empty(), "empty crop batch");
  const int64_t s = crops.front().spec.size;
  auto t = torch::empty({static_cast<int64_t>(crops.size()), 2, s, s, s}, torch::kFloat32);
  for (size_t i = 0; i < crops.size(); ++i) {
    TORCH_CHECK(crops[i].spec.size == s, "mixed crop sizes in one batch");
    std::memcpy(t[static_cast<int64_t>(i)].data_ptr<float>(), crops[i].channels.data(), crops[i].channels.size() * 4);
  }
  return t;
}

namespace {

struct LoadedCase {
  Case c;
  DistanceMap dmap;
};

LoadedCase load_case(const fs::path& dir) {
  LoadedCase lc{read_case(dir), {}};
  if (fs::exists(dir / "distance.json")) {
    lc.dmap = read_distance_map(dir);
  } else {
    lc.dmap = signed_distance_map(lc.c.artery_mask, lc.c.spacing);
  }
  return lc;
}

class CsvLog {
 public:
  CsvLog(const fs::path& path, const std::string& header) {
    if (path.empty()) return;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    out_.open(path, std::ios::trunc);
    if (!out_) throw Error("cannot open log " + path.string());
    out_ << header << '\n';
  }
  void row(const StepLog& s) {
    if (!out_.is_open()) return;
    char buf[64];
    out_ << s.epoch << ',' << s.step;
    for (double v : s.values) {
      std::snprintf(buf, sizeof(buf), ",%.9g", v);
      out_ << buf;
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

void write_config_echo(const fs::path& log_csv, const std::string& echo) {
  if (log_csv.empty() || echo.empty()) return;
  std::ofstream out(fs::path(log_csv.string() + ".config.json"), std::ios::trunc);
  out << echo << '\n';
}

std::vector<int64_t> shuffled(int64_t n, Rng rng) {
  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (int64_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(0, i)]);
  return order;
}

void set_lr(torch::optim::AdamW& opt, double lr) {
  for (auto& group : opt.param_groups()) static_cast<torch::optim::AdamWOptions&>(group.options()).lr(lr);
}

std::vector<torch::Tensor> params_with_prefix(torch::nn::Module& m, const std::vector<std::string>& prefixes) {
  std::vector<torch::Tensor> out;
  for (auto& item : m.named_parameters(true)) {
    for (const auto& p : prefixes) {
      if (item.key().rfind(p, 0) == 0) {
        out.push_back(item.value());
        break;
      }
    }
  }
  return out;
}

}  // namespace

TrainResult pretrain(const std::vector<fs::path>& cases, const nn::ModelConfig& model_cfg, const PretrainConfig& cfg,
                     const fs::path& checkpoint_out, const fs::path& log_csv, const std::string& config_echo) {
  cfg.validate();
  if (cases.empty()) throw Error("pretrain: manifest is empty");
  torch::manual_seed(cfg.seed);
  nn::VmaeModel model(model_cfg);
  model->train();
  const std::vector<std::string> trained = {"encoder.", "decoder."};
  torch::optim::AdamW opt(params_with_prefix(*model, trained),
                          torch::optim::AdamWOptions(cfg.lr_start).weight_decay(cfg.weight_decay));

  const CropSpec spec{model_cfg.crop_size(), model_cfg.patch, 2};
  const int64_t n_tokens = model_cfg.n_tokens();
  const int64_t n_masked = masked_count(n_tokens, cfg.mask.ratio);
  const CropPolicy policy{cfg.min_artery_fraction, 1000, cfg.biased_sampling};
  CsvLog log(log_csv, "epoch,step,loss,loss_intensity,loss_distance");
  write_config_echo(log_csv, config_echo);

  TrainResult result;
  int64_t step = 0;
  const auto n_cases = static_cast<int64_t>(cases.size());
  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    set_lr(opt, cosine_lr(cfg.lr_start, cfg.lr_end, epoch, cfg.epochs));
    std::vector<std::pair<int64_t, int64_t>> items;
    for (int64_t ci : shuffled(n_cases, Rng::derive(cfg.seed, {1, static_cast<uint64_t>(epoch)}))) {
      for (int64_t k = 0; k < cfg.crops_per_case; ++k) items.emplace_back(ci, k);
    }
    int64_t skipped = 0;
    double loss_sum = 0.0;
    int64_t loss_count = 0;
    for (size_t start = 0; start < items.size(); start += static_cast<size_t>(cfg.batch_size)) {
      std::vector<CropSample> crops;
      std::vector<MaskPlan> plans;
      const size_t stop = std::min(items.size(), start + static_cast<size_t>(cfg.batch_size));
      for (size_t i = start; i < stop; ++i) {
        const auto [ci, k] = items[i];
        Rng rng = Rng::derive(cfg.seed, {2, static_cast<uint64_t>(epoch), static_cast<uint64_t>(ci),
                                         static_cast<uint64_t>(k)});
        try {
          const LoadedCase lc = load_case(cases[static_cast<size_t>(ci)]);
          crops.push_back(CropSampler(lc.c, lc.dmap, spec).sample(rng, policy));
          plans.push_back(plan_mask(crops.back(), cfg.mask, rng));
        } catch (const NoValidCropError& e) {
          std::cerr << "warning: skipping crop: " << e.what() << '\n';
          ++skipped;
        }
      }
      if (crops.empty()) continue;
      const auto b = static_cast<int64_t>(crops.size());
      auto volumes = crops_to_tensor(crops);
      if (!cfg.reconstruct_distance) volumes.select(1, 1).zero_();
      auto target = nn::patchify(volumes, model_cfg.patch);
      auto masked = torch::zeros({b, n_tokens}, torch::kBool);
      auto visible = torch::empty({b, n_tokens - n_masked}, torch::kLong);
      for (int64_t r = 0; r < b; ++r) {
        int64_t v = 0;
        const auto& plan = plans[static_cast<size_t>(r)];
        for (int64_t t = 0; t < n_tokens; ++t) {
          if (plan.masked[static_cast<size_t>(t)]) {
            masked[r][t] = true;
          } else {
            visible[r][v++] = t;
          }
        }
      }
      auto vis_patches = target.gather(1, visible.unsqueeze(-1).expand({b, visible.size(1), target.size(2)}));
      auto encoded = model->encoder->forward(vis_patches, visible);
      auto recon = model->decoder->forward(encoded);
      MaeLoss loss = mae_loss(recon, target, masked, n_masked, cfg.reconstruct_distance);
      opt.zero_grad();
      loss.total.backward();
      opt.step();

      StepLog s{epoch, step++,
                {loss.total.item<double>(), loss.intensity.item<double>(), loss.distance.item<double>()}};
      loss_sum += s.values[0];
      ++loss_count;
      log.row(s);
      result.steps.push_back(std::move(s));
    }
    result.skipped_crops += skipped;
    if (2 * skipped > static_cast<int64_t>(items.size())) {
      throw Error("pretrain: " + std::to_string(skipped) + " of " + std::to_string(items.size()) +
                  " crops had no valid artery overlap in epoch " + std::to_string(epoch));
    }
    result.epoch_mean_loss.push_back(loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0);
  }
  if (!checkpoint_out.empty()) save_checkpoint(checkpoint_out, *model, model_cfg, "pretrain", config_echo, trained);
  return result;
}

TrainResult finetune(const std::vector<fs::path>& cases, const nn::ModelConfig& model_cfg,
                     const std::optional<fs::path>& init_checkpoint, const FinetuneConfig& cfg,
                     const fs::path& checkpoint_out, const fs::path& log_csv, const std::string& config_echo) {
  cfg.validate();
  if (cases.empty()) throw Error("finetune: manifest is empty");
  torch::manual_seed(cfg.seed);
  nn::VmaeModel model(model_cfg);
  if (init_checkpoint) nn::load_checkpoint(*init_checkpoint, *model, model_cfg, {"encoder."});
  model->train();
  const std::vector<std::string> trained = {"encoder.", "detector."};
  torch::optim::AdamW opt(params_with_prefix(*model, trained),
                          torch::optim::AdamWOptions(cfg.lr).weight_decay(cfg.weight_decay));

  const CropSpec spec{model_cfg.crop_size(), model_cfg.patch, 2};
  CsvLog log(log_csv, "epoch,step,loss,bce,center,size,iou");
  write_config_echo(log_csv, config_echo);

  TrainResult result;
  int64_t step = 0;
  const auto n_cases = static_cast<int64_t>(cases.size());
  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::pair<int64_t, int64_t>> items;
    for (int64_t ci : shuffled(n_cases, Rng::derive(cfg.seed, {3, static_cast<uint64_t>(epoch)}))) {
      for (int64_t k = 0; k < cfg.crops_per_case; ++k) items.emplace_back(ci, k);
    }
    double loss_sum = 0.0;
    int64_t loss_count = 0;
    for (size_t start = 0; start < items.size(); start += static_cast<size_t>(cfg.batch_size)) {
      std::vector<CropSample> crops;
      std::vector<std::vector<GtBox>> targets;
      const size_t stop = std::min(items.size(), start + static_cast<size_t>(cfg.batch_size));
      for (size_t i = start; i < stop; ++i) {
        const auto [ci, k] = items[i];
        Rng rng = Rng::derive(cfg.seed, {4, static_cast<uint64_t>(epoch), static_cast<uint64_t>(ci),
                                         static_cast<uint64_t>(k)});
        const LoadedCase lc = load_case(cases[static_cast<size_t>(ci)]);
        const CropSampler sampler(lc.c, lc.dmap, spec);
        if (!lc.c.lesions.empty() && rng.uniform() < cfg.positive_fraction) {
          const auto& lesion = lc.c.lesions[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(lc.c.lesions.size()) - 1))];
          crops.push_back(sampler.around(lesion.center_mm, cfg.jitter_voxels, rng));
        } else {
          try {
            crops.push_back(sampler.sample(rng));
          } catch (const NoValidCropError&) {
            crops.push_back(sampler.sample(rng, CropPolicy{0.0, 1, false}));
            ++result.skipped_crops;
          }
        }
        targets.push_back(crop_targets(crops.back()));
      }
      const auto b = static_cast<int64_t>(crops.size());
      auto patches = nn::patchify(crops_to_tensor(crops), model_cfg.patch);
      auto encoded = model->encoder->forward(patches, nn::full_coords(b, model_cfg.n_tokens()));
      auto out = model->detector->forward(encoded);
      DetectionLoss loss = detection_loss(out, targets, crops.front().extent_mm(), cfg);
      opt.zero_grad();
      loss.total.backward();
      opt.step();

      StepLog s{epoch, step++,
                {loss.total.item<double>(), loss.bce.item<double>(), loss.center.item<double>(),
                 loss.size.item<double>(), loss.iou.item<double>()}};
      loss_sum += s.values[0];
      ++loss_count;
      log.row(s);
      result.steps.push_back(std::move(s));
    }
    result.epoch_mean_loss.push_back(loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0);
  }
  if (!checkpoint_out.empty()) save_checkpoint(checkpoint_out, *model, model_cfg, "detector", config_echo, trained);
  return result;
}

}  // namespace vmae::train

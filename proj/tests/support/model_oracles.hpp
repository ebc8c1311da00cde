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

// Autograd-derived dependency structure of the factorized layer.

#include <cstdio>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "vmae/model.hpp"

namespace vmae::oracle {

/// Entry [i][j] is true when output i of one step depends on input j, with
/// index L standing for CLS. Computed from per-row Jacobians.
inline std::vector<std::vector<bool>> step_dependency(nn::FactorizedBlock& block, const nn::GroupLayout& layout,
                                                      const torch::Tensor& coords, int64_t dim) {
  const int64_t l = coords.size(1);
  torch::manual_seed(123);
  auto x = torch::randn({1, l, dim}, torch::kFloat64).requires_grad_(true);
  auto cls = torch::randn({1, 1, dim}, torch::kFloat64).requires_grad_(true);
  const nn::Tokens out = block->forward(nn::Tokens{x, cls, coords}, layout);
  std::vector<std::vector<bool>> dep(static_cast<size_t>(l + 1), std::vector<bool>(static_cast<size_t>(l + 1), false));
  for (int64_t i = 0; i <= l; ++i) {
    auto target = i < l ? out.x[0][i].sum() : out.cls[0][0].sum();
    auto grads = torch::autograd::grad({target}, {x, cls}, {}, /*retain_graph=*/true, false, /*allow_unused=*/true);
    auto gx = grads[0].defined() ? grads[0].abs().sum(-1)[0] : torch::zeros({l}, torch::kFloat64);
    for (int64_t j = 0; j < l; ++j) dep[i][j] = gx[j].item<double>() > 0.0;
    dep[i][l] = grads[1].defined() && grads[1].abs().sum().item<double>() > 0.0;
  }
  return dep;
}

/// Union of the slice-step and column-step dependencies of one layer.
inline std::vector<std::vector<bool>> layer_reachability(const nn::ModelConfig& cfg) {
  nn::FactorizedLayer layer(cfg.dim, cfg.heads_spatial, cfg.heads_axial, cfg.mlp_ratio);
  layer->to(torch::kFloat64);
  const auto coords = nn::full_coords(1, cfg.n_tokens());
  const nn::Layouts layouts = nn::make_layouts(coords, cfg);
  auto a = step_dependency(layer->spatial, layouts.slices, coords, cfg.dim);
  const auto b = step_dependency(layer->axial, layouts.columns, coords, cfg.dim);
  for (size_t i = 0; i < a.size(); ++i) {
    for (size_t j = 0; j < a.size(); ++j) a[i][j] = a[i][j] || b[i][j];
  }
  return a;
}

/// The expected predicate on a g^3 grid in scan order: same z, or same (y, x),
/// or either end is CLS (index g^3).
inline bool factorized_predicate(int64_t i, int64_t j, int64_t g) {
  const int64_t n = g * g * g;
  if (i == n || j == n) return true;
  const int64_t zi = i / (g * g), zj = j / (g * g);
  return zi == zj || (i % (g * g)) == (j % (g * g));
}

}  // namespace vmae::oracle

namespace vmae::oracle {

inline std::string fmt_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  int64_t checked = 0;
  std::string worst;
};

/// Central differences against autograd for every `stride`-th element of every
/// parameter whose name starts with one of `prefixes`. `loss` must rebuild the
/// graph on each call. Relative error is |a - n| / max(|a|, |n|, floor).
template <class LossFn>
GradCheckResult grad_check(torch::nn::Module& module, const std::vector<std::string>& prefixes, LossFn loss,
                           double eps = 1e-6, int64_t stride = 1, double floor = 1e-7) {
  module.zero_grad();
  loss().backward();
  GradCheckResult r;
  torch::NoGradGuard no_grad;
  for (auto& item : module.named_parameters(true)) {
    bool selected = false;
    for (const auto& p : prefixes) selected = selected || item.key().rfind(p, 0) == 0;
    if (!selected) continue;
    auto param = item.value();
    auto flat = param.view({-1});
    auto grad = param.grad().defined() ? param.grad().view({-1}).clone() : torch::zeros_like(flat);
    for (int64_t i = 0; i < flat.size(0); i += stride) {
      const double orig = flat[i].item<double>();
      flat[i] = orig + eps;
      const double up = loss().template item<double>();
      flat[i] = orig - eps;
      const double down = loss().template item<double>();
      flat[i] = orig;
      const double numeric = (up - down) / (2 * eps);
      const double analytic = grad[i].item<double>();
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      if (rel > r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst = item.key() + "[" + std::to_string(i) + "] analytic " + fmt_sci(analytic) + " numeric " +
                  fmt_sci(numeric);
      }
      ++r.checked;
    }
  }
  return r;
}

}  // namespace vmae::oracle

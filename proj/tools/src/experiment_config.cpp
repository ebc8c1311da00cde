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

#include "experiment_config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <map>

extern char** environ;

namespace vmae::cli {
using nlohmann::json;

namespace {

// One binder per (section, key): reads into and writes out of the config.
struct Field {
  std::function<void(ExperimentConfig&, const json&)> set;
  std::function<json(const ExperimentConfig&)> get;
};
using Section = std::map<std::string, Field>;

template <class T, class Acc>
Field scalar(Acc acc) {
  return {[acc](ExperimentConfig& c, const json& v) { acc(c) = v.get<T>(); },
          [acc](const ExperimentConfig& c) { return json(acc(const_cast<ExperimentConfig&>(c))); }};
}

template <class T, class Acc>
Field range(Acc acc) {
  return {[acc](ExperimentConfig& c, const json& v) {
            if (!v.is_array() || v.size() != 2) throw ConfigError("range must be [lo, hi]");
            acc(c) = Range<T>{v[0].get<T>(), v[1].get<T>()};
          },
          [acc](const ExperimentConfig& c) {
            const auto& r = acc(const_cast<ExperimentConfig&>(c));
            return json::array({r.lo, r.hi});
          }};
}

Field path_field(std::filesystem::path IoConfig::*member) {
  return {[member](ExperimentConfig& c, const json& v) { c.io.*member = v.get<std::string>(); },
          [member](const ExperimentConfig& c) { return json((c.io.*member).string()); }};
}

#define ACC(expr) [](ExperimentConfig& c) -> auto& { return expr; }

const std::map<std::string, Section>& schema() {
  static const std::map<std::string, Section> s = [] {
    std::map<std::string, Section> m;
    m["phantom"] = {
        {"volume_dims",
         {[](ExperimentConfig& c, const json& v) {
            const auto d = v.get<std::array<int64_t, 3>>();
            c.phantom.volume_dims = {d[0], d[1], d[2]};
          },
          [](const ExperimentConfig& c) {
            const Dims& d = c.phantom.volume_dims;
            return json::array({d.z, d.y, d.x});
          }}},
        {"spacing_mm",
         {[](ExperimentConfig& c, const json& v) {
            const auto d = v.get<std::array<double, 3>>();
            c.phantom.spacing = {d[0], d[1], d[2]};
          },
          [](const ExperimentConfig& c) {
            const Spacing& s = c.phantom.spacing;
            return json::array({s.z, s.y, s.x});
          }}},
        {"n_vessels", range<int>(ACC(c.phantom.n_vessels))},
        {"vessel_radius_mm", range<double>(ACC(c.phantom.vessel_radius_mm))},
        {"n_lesions", range<int>(ACC(c.phantom.n_lesions))},
        {"lesion_diameter_mm", range<double>(ACC(c.phantom.lesion_diameter_mm))},
        {"vessel_intensity", range<double>(ACC(c.phantom.vessel_intensity))},
        {"background_intensity", scalar<double>(ACC(c.phantom.background_intensity))},
        {"noise_std", scalar<double>(ACC(c.phantom.noise_std))},
    };
    m["model"] = {
        {"depth", scalar<int64_t>(ACC(c.model.depth))},
        {"dim", scalar<int64_t>(ACC(c.model.dim))},
        {"heads_spatial", scalar<int64_t>(ACC(c.model.heads_spatial))},
        {"heads_axial", scalar<int64_t>(ACC(c.model.heads_axial))},
        {"patch", scalar<int64_t>(ACC(c.model.patch))},
        {"grid", scalar<int64_t>(ACC(c.model.grid))},
        {"in_channels", scalar<int64_t>(ACC(c.model.in_channels))},
        {"n_queries", scalar<int64_t>(ACC(c.model.n_queries))},
        {"det_heads", scalar<int64_t>(ACC(c.model.det_heads))},
        {"decoder_depth", scalar<int64_t>(ACC(c.model.decoder_depth))},
        {"decoder_dim", scalar<int64_t>(ACC(c.model.decoder_dim))},
        {"mlp_ratio", scalar<int64_t>(ACC(c.model.mlp_ratio))},
        {"axial_window", scalar<int64_t>(ACC(c.model.axial_window))},
    };
    m["pretrain"] = {
        {"epochs", scalar<int64_t>(ACC(c.pretrain.epochs))},
        {"lr_start", scalar<double>(ACC(c.pretrain.lr_start))},
        {"lr_end", scalar<double>(ACC(c.pretrain.lr_end))},
        {"weight_decay", scalar<double>(ACC(c.pretrain.weight_decay))},
        {"batch_size", scalar<int64_t>(ACC(c.pretrain.batch_size))},
        {"crops_per_case", scalar<int64_t>(ACC(c.pretrain.crops_per_case))},
        {"mask_ratio", scalar<double>(ACC(c.pretrain.mask.ratio))},
        {"mask_beta", scalar<double>(ACC(c.pretrain.mask.beta))},
        {"mask_epsilon", scalar<double>(ACC(c.pretrain.mask.epsilon))},
        {"mask_top_k", scalar<bool>(ACC(c.pretrain.mask.top_k))},
        {"biased_sampling", scalar<bool>(ACC(c.pretrain.biased_sampling))},
        {"reconstruct_distance", scalar<bool>(ACC(c.pretrain.reconstruct_distance))},
        {"min_artery_fraction", scalar<double>(ACC(c.pretrain.min_artery_fraction))},
    };
    m["finetune"] = {
        {"epochs", scalar<int64_t>(ACC(c.finetune.epochs))},
        {"lr", scalar<double>(ACC(c.finetune.lr))},
        {"weight_decay", scalar<double>(ACC(c.finetune.weight_decay))},
        {"multi_match_radius_mm", scalar<double>(ACC(c.finetune.multi_match_radius_mm))},
        {"batch_size", scalar<int64_t>(ACC(c.finetune.batch_size))},
        {"crops_per_case", scalar<int64_t>(ACC(c.finetune.crops_per_case))},
        {"positive_fraction", scalar<double>(ACC(c.finetune.positive_fraction))},
        {"jitter_voxels", scalar<int64_t>(ACC(c.finetune.jitter_voxels))},
    };
    m["infer"] = {
        {"stride", scalar<int64_t>(ACC(c.infer.stride))},
        {"nms_iou", scalar<double>(ACC(c.infer.nms_iou))},
        {"min_score", scalar<double>(ACC(c.infer.min_score))},
        {"batch_size", scalar<int64_t>(ACC(c.infer.batch_size))},
    };
    m["eval"] = {
        {"t_iou", scalar<double>(ACC(c.eval.t_iou))},
        {"fpr_budget", scalar<double>(ACC(c.eval.fpr_budget))},
        {"strata_edges",
         {[](ExperimentConfig& c, const json& v) { c.eval.strata_edges = v.get<std::array<double, 2>>(); },
          [](const ExperimentConfig& c) { return json(c.eval.strata_edges); }}},
        {"n_perm", scalar<int64_t>(ACC(c.eval.n_perm))},
    };
    m["io"] = {
        {"data_dir", path_field(&IoConfig::data_dir)},
        {"train_manifest", path_field(&IoConfig::train_manifest)},
        {"test_manifest", path_field(&IoConfig::test_manifest)},
        {"work_dir", path_field(&IoConfig::work_dir)},
    };
    return m;
  }();
  return s;
}

#undef ACC

void set_field(ExperimentConfig& cfg, const std::string& section, const std::string& key, const json& v) {
  const auto& s = schema();
  auto sec = s.find(section);
  if (sec == s.end()) throw ConfigError("unknown config section '" + section + "'");
  auto f = sec->second.find(key);
  if (f == sec->second.end()) throw ConfigError("unknown config key '" + section + "." + key + "'");
  try {
    f->second.set(cfg, v);
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + section + "." + key + "': " + e.what());
  }
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return s;
}

}  // namespace

void ExperimentConfig::propagate_seed() {
  phantom.seed = seed;
  pretrain.seed = seed;
  finetune.seed = seed;
}

void ExperimentConfig::validate() const {
  phantom.validate(model.crop_size());
  model.validate();
  pretrain.validate();
  finetune.validate();
  if (infer.stride < 1 || infer.batch_size < 1) throw ConfigError("infer.stride and infer.batch_size must be >= 1");
  if (!(eval.t_iou > 0.0 && eval.t_iou <= 1.0)) throw ConfigError("eval.t_iou must lie in (0, 1]");
  if (eval.fpr_budget < 0.0) throw ConfigError("eval.fpr_budget must be >= 0");
  if (!(eval.strata_edges[0] < eval.strata_edges[1])) throw ConfigError("eval.strata_edges must be increasing");
  if (eval.n_perm < 1) throw ConfigError("eval.n_perm must be >= 1");
}

json ExperimentConfig::to_json() const {
  json j;
  j["seed"] = seed;
  for (const auto& [section, fields] : schema()) {
    for (const auto& [key, f] : fields) j[section][key] = f.get(*this);
  }
  return j;
}

void apply_json(ExperimentConfig& cfg, const json& j) {
  if (!j.is_object()) throw ConfigError("config root must be an object");
  for (const auto& [section, body] : j.items()) {
    if (section == "seed") {
      cfg.seed = body.get<uint64_t>();
      continue;
    }
    if (!schema().contains(section)) throw ConfigError("unknown config section '" + section + "'");
    if (!body.is_object()) throw ConfigError("config section '" + section + "' must be an object");
    for (const auto& [key, v] : body.items()) set_field(cfg, section, key, v);
  }
}

void apply_env_overrides(ExperimentConfig& cfg, char** envp) {
  const std::string prefix = kEnvPrefix;
  for (char** e = envp; e != nullptr && *e != nullptr; ++e) {
    const std::string entry = *e;
    if (entry.rfind(prefix, 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    const std::string name = lower(entry.substr(prefix.size(), eq - prefix.size()));
    const std::string text = entry.substr(eq + 1);
    json value;
    try {
      value = json::parse(text);
    } catch (const json::exception&) {
      value = text;
    }
    if (name == "seed") {
      try {
        cfg.seed = value.get<uint64_t>();
      } catch (const json::exception&) {
        throw ConfigError("VMAE__SEED must be a non-negative integer");
      }
      continue;
    }
    const auto sep = name.find("__");
    if (sep == std::string::npos) throw ConfigError("environment override " + entry.substr(0, eq) + " lacks a key");
    set_field(cfg, name.substr(0, sep), name.substr(sep + 2), value);
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  ExperimentConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    try {
      apply_json(cfg, json::parse(in));
    } catch (const json::parse_error& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
  apply_env_overrides(cfg, ::environ);
  return cfg;
}

}  // namespace vmae::cli

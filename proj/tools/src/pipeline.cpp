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

#include "pipeline.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "vmae/checkpoint.hpp"
#include "vmae/infer.hpp"

namespace vmae::cli {
using nlohmann::json;

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void configure_runtime(int workers) {
  torch::set_num_threads(std::max(1, workers));
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 256 << 20);
#endif
}

void guard_output(const fs::path& path, bool force) {
  if (fs::exists(path) && !force) {
    throw Error(path.string() + " already exists (pass --force to overwrite)");
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("short write to " + path.string());
}

// Runs fn(i) for i in [0, n) on up to `workers` threads; rethrows the first failure.
template <class Fn>
void parallel_for(int64_t n, int workers, Fn fn) {
  std::atomic<int64_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto body = [&] {
    for (int64_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  const int t = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (t == 1) {
    body();
  } else {
    std::vector<std::jthread> pool;
    for (int k = 0; k < t; ++k) pool.emplace_back(body);
  }
  if (failure) std::rethrow_exception(failure);
}

std::string echo(const ExperimentConfig& cfg) { return cfg.to_json().dump(); }

DistanceMap load_distance(const fs::path& dir, const Case& c) {
  if (fs::exists(dir / "distance.json")) return read_distance_map(dir);
  return signed_distance_map(c.artery_mask, c.spacing);
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
std::string optional_csv(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

}  // namespace

SynthResult synthesize(const ExperimentConfig& cfg, int64_t n_cases, int64_t holdout, const fs::path& out_dir,
                       bool force, int workers) {
  if (n_cases < 1) throw ConfigError("--n-cases must be >= 1");
  if (holdout < 0 || holdout > n_cases) throw ConfigError("--holdout must lie in [0, n_cases]");
  cfg.phantom.validate(cfg.model.crop_size());
  if (fs::exists(out_dir) && !fs::is_empty(out_dir)) {
    if (!force) throw Error(out_dir.string() + " exists and is not empty (pass --force to overwrite)");
    fs::remove_all(out_dir);
  }
  fs::create_directories(out_dir);

  std::vector<std::string> names(static_cast<size_t>(n_cases));
  parallel_for(n_cases, workers, [&](int64_t i) {
    const Case c = generate_case(cfg.phantom, i);
    const fs::path dir = out_dir / c.case_id;
    write_case(c, dir);
    write_distance_map(signed_distance_map(c.artery_mask, c.spacing), dir);
    names[static_cast<size_t>(i)] = c.case_id;
  });

  SynthResult r;
  r.n_train = n_cases - holdout;
  r.n_test = holdout;
  r.train_manifest = out_dir / "train.txt";
  r.test_manifest = out_dir / "test.txt";
  write_manifest(r.train_manifest, {names.begin(), names.begin() + r.n_train});
  write_manifest(r.test_manifest, {names.begin() + r.n_train, names.end()});
  write_text(out_dir / "config.json", cfg.to_json().dump(2) + "\n");
  return r;
}

train::TrainResult run_pretrain(const ExperimentConfig& cfg, const fs::path& manifest, const fs::path& checkpoint,
                                const fs::path& log_csv) {
  return train::pretrain(read_manifest(manifest), cfg.model, cfg.pretrain, checkpoint, log_csv, echo(cfg));
}

train::TrainResult run_finetune(const ExperimentConfig& cfg, const fs::path& manifest,
                                const std::optional<fs::path>& init, const fs::path& checkpoint,
                                const fs::path& log_csv) {
  return train::finetune(read_manifest(manifest), cfg.model, init, cfg.finetune, checkpoint, log_csv, echo(cfg));
}

std::vector<CasePredictions> run_infer(const ExperimentConfig& cfg, const fs::path& checkpoint,
                                       const std::vector<fs::path>& case_dirs) {
  nn::VmaeModel model(cfg.model);
  const auto header = nn::load_checkpoint(checkpoint, *model, cfg.model, {"encoder.", "detector."});
  if (header.kind != "detector") {
    throw Error(checkpoint.string() + ": expected a finetuned detector checkpoint, got kind '" + header.kind + "'");
  }
  std::vector<CasePredictions> out;
  for (const auto& dir : case_dirs) {
    const Case c = read_case(dir);
    out.push_back(nn::sliding_window_infer(model, c, load_distance(dir, c), cfg.infer));
  }
  return out;
}

GroundTruth load_ground_truth(const std::vector<fs::path>& case_dirs) {
  GroundTruth gt;
  for (const auto& dir : case_dirs) {
    const Case c = read_case(dir);
    gt.case_ids.push_back(c.case_id);
    gt.lesions.push_back(c.lesions);
  }
  return gt;
}

EvalReport evaluate(const ExperimentConfig& cfg, const GroundTruth& gt,
                    const std::vector<std::pair<std::string, std::vector<CasePredictions>>>& sets) {
  EvalReport report;
  for (const auto& [label, preds] : sets) {
    std::map<std::string, const CasePredictions*> by_id;
    for (const auto& p : preds) by_id[p.case_id] = &p;
    std::vector<LabeledCase> labeled;
    for (size_t i = 0; i < gt.case_ids.size(); ++i) {
      auto it = by_id.find(gt.case_ids[i]);
      if (it == by_id.end()) throw Error("prediction set '" + label + "' has no entry for " + gt.case_ids[i]);
      labeled.push_back(match_detections(*it->second, gt.lesions[i], cfg.eval.t_iou));
    }
    SetReport s;
    s.label = label;
    s.curve = froc(labeled);
    const FrocPoint op = operating_point(s.curve, cfg.eval.fpr_budget);
    s.se_at_budget = se_at_fpr(s.curve, cfg.eval.fpr_budget);
    s.threshold = op.threshold;
    s.patient = patient_metrics(labeled, s.threshold);
    s.strata = strata_sensitivity(labeled, s.threshold, cfg.eval.strata_edges);
    s.hits = lesion_hits(labeled, s.threshold);
    report.sets.push_back(std::move(s));
  }
  for (size_t a = 0; a < report.sets.size(); ++a) {
    for (size_t b = a + 1; b < report.sets.size(); ++b) {
      report.pairs.push_back({report.sets[a].label, report.sets[b].label,
                              permutation_test(report.sets[a].hits, report.sets[b].hits, cfg.eval.n_perm, cfg.seed)});
    }
  }
  return report;
}

std::string render_froc_svg(const std::vector<std::pair<std::string, FrocCurve>>& curves) {
  constexpr double kW = 480, kH = 360, kL = 60, kR = 20, kT = 20, kB = 50, kMaxFpr = 2.0;
  const double pw = kW - kL - kR, ph = kH - kT - kB;
  auto sx = [&](double f) { return kL + pw * std::min(f, kMaxFpr) / kMaxFpr; };
  auto sy = [&](double s) { return kT + ph * (1.0 - s); };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  std::ostringstream o;
  char buf[160];
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW
    << ' ' << kH << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double f = 0.5 * i, s = 0.25 * i;
    std::snprintf(buf, sizeof(buf), "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#ddd\"/>\n", sx(f),
                  sy(0), sx(f), sy(1));
    o << buf;
    std::snprintf(buf, sizeof(buf), "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#ddd\"/>\n", sx(0),
                  sy(s), sx(kMaxFpr), sy(s));
    o << buf;
    std::snprintf(buf, sizeof(buf), "<text x=\"%.2f\" y=\"%.2f\" font-size=\"11\" text-anchor=\"middle\">%.1f</text>\n",
                  sx(f), sy(0) + 16, f);
    o << buf;
    std::snprintf(buf, sizeof(buf), "<text x=\"%.2f\" y=\"%.2f\" font-size=\"11\" text-anchor=\"end\">%.2f</text>\n",
                  sx(0) - 6, sy(s) + 4, s);
    o << buf;
  }
  std::snprintf(buf, sizeof(buf), "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"none\" stroke=\"black\"/>\n",
                kL, kT, pw, ph);
  o << buf;
  std::snprintf(buf, sizeof(buf), "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" text-anchor=\"middle\">FPs per scan</text>\n",
                kL + pw / 2, kH - 12);
  o << buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"14\" y=\"%.2f\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 %.2f)\">"
                "Sensitivity</text>\n",
                kT + ph / 2, kT + ph / 2);
  o << buf;

  for (size_t k = 0; k < curves.size(); ++k) {
    const auto& [label, curve] = curves[k];
    const char* color = kColors[k % std::size(kColors)];
    // Step function: sensitivity holds until the next operating point.
    std::vector<std::pair<double, double>> pts;
    double se = 0.0;
    for (const auto& p : curve.points) {
      if (p.fpr > kMaxFpr) break;
      if (!pts.empty()) pts.emplace_back(p.fpr, se);
      se = p.se;
      pts.emplace_back(p.fpr, se);
    }
    if (pts.empty()) pts.emplace_back(0.0, 0.0);
    pts.emplace_back(kMaxFpr, se);
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (size_t i = 0; i < pts.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%s%.2f,%.2f", i ? " " : "", sx(pts[i].first), sy(pts[i].second));
      o << buf;
    }
    o << "\"/>\n";
    const double ly = kT + 16 + 16 * static_cast<double>(k);
    std::snprintf(buf, sizeof(buf), "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"%s\" stroke-width=\"2\"/>\n",
                  kL + pw - 110, ly, kL + pw - 90, ly, color);
    o << buf;
    std::snprintf(buf, sizeof(buf), "<text x=\"%.2f\" y=\"%.2f\" font-size=\"11\">", kL + pw - 85, ly + 4);
    o << buf;
    for (char ch : label) {
      if (ch == '<') o << "&lt;";
      else if (ch == '>') o << "&gt;";
      else if (ch == '&') o << "&amp;";
      else o << ch;
    }
    o << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void write_eval_report(const EvalReport& report, const ExperimentConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  json j;
  j["config"] = cfg.to_json();
  j["fpr_budget"] = cfg.eval.fpr_budget;
  std::ostringstream csv;
  csv << "label,n_scans,n_lesions,se_at_fpr,threshold,p_se,p_sp,se_small,se_medium,se_large\n";
  std::vector<std::pair<std::string, FrocCurve>> curves;
  for (const auto& s : report.sets) {
    json m;
    m["label"] = s.label;
    m["n_scans"] = s.curve.n_scans;
    m["n_lesions"] = s.curve.n_lesions;
    m["se_at_fpr"] = s.se_at_budget;
    m["threshold"] = std::isfinite(s.threshold) ? json(s.threshold) : json(nullptr);
    m["p_se"] = optional_json(s.patient.p_se);
    m["p_sp"] = optional_json(s.patient.p_sp);
    m["strata"] = {{"small", optional_json(s.strata[0])},
                   {"medium", optional_json(s.strata[1])},
                   {"large", optional_json(s.strata[2])}};
    j["sets"].push_back(m);
    csv << s.label << ',' << s.curve.n_scans << ',' << s.curve.n_lesions << ',' << format_double(s.se_at_budget) << ','
        << format_double(s.threshold) << ',' << optional_csv(s.patient.p_se) << ',' << optional_csv(s.patient.p_sp)
        << ',' << optional_csv(s.strata[0]) << ',' << optional_csv(s.strata[1]) << ',' << optional_csv(s.strata[2])
        << '\n';

    std::ostringstream fc;
    fc << "threshold,fpr,se\n";
    for (const auto& p : s.curve.points) {
      fc << format_double(p.threshold) << ',' << format_double(p.fpr) << ',' << format_double(p.se) << '\n';
    }
    write_text(out_dir / ("froc_" + s.label + ".csv"), fc.str());
    curves.emplace_back(s.label, s.curve);
  }
  j["permutation"] = json::array();
  for (const auto& p : report.pairs) j["permutation"].push_back({{"a", p.a}, {"b", p.b}, {"p", p.p}});
  if (!report.pairs.empty()) {
    csv << "\npair_a,pair_b,p_value\n";
    for (const auto& p : report.pairs) csv << p.a << ',' << p.b << ',' << format_double(p.p) << '\n';
  }
  write_text(out_dir / "metrics.json", j.dump(2) + "\n");
  write_text(out_dir / "metrics.csv", csv.str());
  write_text(out_dir / "froc.svg", render_froc_svg(curves));
}

std::vector<AblationVariant> ablation_variants(bool reduced) {
  std::vector<AblationVariant> all = {
      {"A", true, true, true, true},
      {"D", true, false, true, true},
      {"E", true, false, false, true},
      {"F", true, false, false, false},
      {"G", false, false, false, false},
  };
  if (!reduced) return all;
  return {all.front(), all.back()};
}

EvalReport run_ablation(const ExperimentConfig& cfg, const fs::path& out_dir, bool reduced) {
  if (reduced) std::cerr << "warning: reduced budget, running variants A and G only\n";
  const auto train_manifest = cfg.io.train_manifest;
  const auto test_dirs = read_manifest(cfg.io.test_manifest);
  const GroundTruth gt = load_ground_truth(test_dirs);
  std::vector<std::pair<std::string, std::vector<CasePredictions>>> sets;
  for (const auto& v : ablation_variants(reduced)) {
    ExperimentConfig vc = cfg;
    vc.pretrain.reconstruct_distance = v.reconstruct_distance;
    vc.pretrain.mask.beta = v.biased_masking ? cfg.pretrain.mask.beta : 0.0;
    vc.pretrain.biased_sampling = v.biased_sampling;
    const fs::path dir = out_dir / v.name;
    fs::create_directories(dir);
    std::optional<fs::path> init;
    if (v.pretrain) {
      init = dir / "pretrain.ckpt";
      run_pretrain(vc, train_manifest, *init, dir / "pretrain_log.csv");
    }
    run_finetune(vc, train_manifest, init, dir / "finetune.ckpt", dir / "finetune_log.csv");
    auto preds = run_infer(vc, dir / "finetune.ckpt", test_dirs);
    write_predictions(dir / "predictions.json", preds, echo(vc));
    sets.emplace_back(v.name, std::move(preds));
  }
  EvalReport report = evaluate(cfg, gt, sets);
  write_eval_report(report, cfg, out_dir);

  json j;
  j["config"] = cfg.to_json();
  j["reduced"] = reduced;
  std::ostringstream csv;
  csv << "variant,pretrain,reco,biased_masking,biased_sampling,se_at_fpr\n";
  const auto variants = ablation_variants(reduced);
  for (size_t i = 0; i < variants.size(); ++i) {
    const auto& v = variants[i];
    j["variants"].push_back({{"name", v.name},
                             {"pretrain", v.pretrain},
                             {"reconstruct_distance", v.reconstruct_distance},
                             {"biased_masking", v.biased_masking},
                             {"biased_sampling", v.biased_sampling},
                             {"se_at_fpr", report.sets[i].se_at_budget}});
    csv << v.name << ',' << v.pretrain << ',' << v.reconstruct_distance << ',' << v.biased_masking << ','
        << v.biased_sampling << ',' << format_double(report.sets[i].se_at_budget) << '\n';
  }
  for (const auto& p : report.pairs) j["permutation"].push_back({{"a", p.a}, {"b", p.b}, {"p", p.p}});
  write_text(out_dir / "ablation.json", j.dump(2) + "\n");
  write_text(out_dir / "ablation.csv", csv.str());
  return report;
}

}  // namespace vmae::cli

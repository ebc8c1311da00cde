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

#include <iostream>

#include <CLI11.hpp>

#include "pipeline.hpp"

namespace {

using namespace vmae;
using namespace vmae::cli;

struct Common {
  std::string config;
  std::optional<uint64_t> seed;
  int workers = 1;
  bool force = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON experiment config")->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "Overrides the config seed");
  sub->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
  sub->add_flag("--force", c.force, "Overwrite existing outputs");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  cfg.propagate_seed();
  cfg.validate();
  configure_runtime(c.workers);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vmae: vessel-guided masked autoencoder pre-training and aneurysm detection"};
  app.require_subcommand(1);
  Common common;

  auto* synth = app.add_subcommand("synth", "Generate synthetic phantoms, distance maps and manifests");
  int64_t n_cases = 10, holdout = 0;
  std::string synth_out;
  add_common(synth, common);
  synth->add_option("--n-cases", n_cases, "Number of cases")->check(CLI::PositiveNumber);
  synth->add_option("--holdout", holdout, "Cases reserved for test.txt");
  synth->add_option("--out", synth_out, "Output directory (default io.data_dir)");

  auto* pre = app.add_subcommand("pretrain", "MAE pre-training");
  std::string pre_manifest, pre_out, pre_log;
  add_common(pre, common);
  pre->add_option("--manifest", pre_manifest, "Case manifest (default io.train_manifest)");
  pre->add_option("--out", pre_out, "Checkpoint path (default <work_dir>/pretrain.ckpt)");
  pre->add_option("--log", pre_log, "CSV log path (default <out>.log.csv)");

  auto* fine = app.add_subcommand("finetune", "Detection fine-tuning");
  std::string fine_manifest, fine_out, fine_log, fine_init;
  bool from_scratch = false;
  add_common(fine, common);
  fine->add_option("--manifest", fine_manifest, "Case manifest (default io.train_manifest)");
  auto* init_opt = fine->add_option("--init", fine_init, "Pre-trained checkpoint")->check(CLI::ExistingFile);
  auto* scratch_opt = fine->add_flag("--from-scratch", from_scratch, "Random encoder initialisation");
  init_opt->excludes(scratch_opt);
  fine->add_option("--out", fine_out, "Checkpoint path (default <work_dir>/finetune.ckpt)");
  fine->add_option("--log", fine_log, "CSV log path (default <out>.log.csv)");

  auto* inf = app.add_subcommand("infer", "Sliding-window inference");
  std::string inf_ckpt, inf_manifest, inf_case, inf_out;
  add_common(inf, common);
  inf->add_option("--checkpoint", inf_ckpt, "Fine-tuned checkpoint")->required()->check(CLI::ExistingFile);
  auto* man_opt = inf->add_option("--manifest", inf_manifest, "Case manifest (default io.test_manifest)");
  inf->add_option("--case", inf_case, "Single case directory")->check(CLI::ExistingDirectory)->excludes(man_opt);
  inf->add_option("--out", inf_out, "Predictions JSON (default <work_dir>/predictions.json)");

  auto* ev = app.add_subcommand("eval", "FROC, operating point, patient and strata metrics");
  std::vector<std::string> ev_preds, ev_labels;
  std::string ev_manifest, ev_out;
  add_common(ev, common);
  ev->add_option("--pred", ev_preds, "Predictions JSON (repeatable)")->required()->check(CLI::ExistingFile);
  ev->add_option("--label", ev_labels, "Label per --pred");
  ev->add_option("--manifest", ev_manifest, "Ground-truth manifest (default io.test_manifest)");
  ev->add_option("--out", ev_out, "Report directory (default <work_dir>/eval)");

  auto* abl = app.add_subcommand("ablate", "Train and compare the ablation variants");
  bool reduced = false;
  std::string abl_out;
  add_common(abl, common);
  abl->add_flag("--reduced", reduced, "Insufficient compute: run variants A and G only");
  abl->add_option("--out", abl_out, "Report directory (default <work_dir>/ablation)");

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig cfg = resolve(common);
    const fs::path work = cfg.io.work_dir;

    if (*synth) {
      const fs::path out = synth_out.empty() ? cfg.io.data_dir : fs::path(synth_out);
      const SynthResult r = synthesize(cfg, n_cases, holdout, out, common.force, common.workers);
      std::cout << "wrote " << r.n_train << " training and " << r.n_test << " held-out cases to " << out.string()
                << "\n";
    } else if (*pre) {
      const fs::path out = pre_out.empty() ? work / "pretrain.ckpt" : fs::path(pre_out);
      const fs::path log = pre_log.empty() ? fs::path(out.string() + ".log.csv") : fs::path(pre_log);
      guard_output(out, common.force);
      guard_output(log, common.force);
      const auto r = run_pretrain(cfg, pre_manifest.empty() ? cfg.io.train_manifest : fs::path(pre_manifest), out, log);
      std::cout << "pretrain: " << r.steps.size() << " steps, final epoch loss "
                << format_double(r.epoch_mean_loss.back()) << "\n";
    } else if (*fine) {
      if (fine_init.empty() && !from_scratch) throw ConfigError("finetune needs --init CKPT or --from-scratch");
      const fs::path out = fine_out.empty() ? work / "finetune.ckpt" : fs::path(fine_out);
      const fs::path log = fine_log.empty() ? fs::path(out.string() + ".log.csv") : fs::path(fine_log);
      guard_output(out, common.force);
      guard_output(log, common.force);
      std::optional<fs::path> init;
      if (!fine_init.empty()) init = fine_init;
      const auto r = run_finetune(cfg, fine_manifest.empty() ? cfg.io.train_manifest : fs::path(fine_manifest), init,
                                  out, log);
      std::cout << "finetune: " << r.steps.size() << " steps, final epoch loss "
                << format_double(r.epoch_mean_loss.back()) << "\n";
    } else if (*inf) {
      const fs::path out = inf_out.empty() ? work / "predictions.json" : fs::path(inf_out);
      guard_output(out, common.force);
      std::vector<fs::path> dirs;
      if (!inf_case.empty()) {
        dirs.emplace_back(inf_case);
      } else {
        dirs = read_manifest(inf_manifest.empty() ? cfg.io.test_manifest : fs::path(inf_manifest));
      }
      const auto preds = run_infer(cfg, inf_ckpt, dirs);
      write_predictions(out, preds, cfg.to_json().dump());
      std::cout << "wrote predictions for " << preds.size() << " cases to " << out.string() << "\n";
    } else if (*ev) {
      if (!ev_labels.empty() && ev_labels.size() != ev_preds.size()) {
        throw ConfigError("--label must be given once per --pred");
      }
      const fs::path out = ev_out.empty() ? work / "eval" : fs::path(ev_out);
      guard_output(out / "metrics.json", common.force);
      const GroundTruth gt =
          load_ground_truth(read_manifest(ev_manifest.empty() ? cfg.io.test_manifest : fs::path(ev_manifest)));
      std::vector<std::pair<std::string, std::vector<CasePredictions>>> sets;
      for (size_t i = 0; i < ev_preds.size(); ++i) {
        const std::string label = ev_labels.empty() ? "set" + std::to_string(i) : ev_labels[i];
        sets.emplace_back(label, read_predictions(ev_preds[i]));
      }
      const EvalReport report = evaluate(cfg, gt, sets);
      write_eval_report(report, cfg, out);
      for (const auto& s : report.sets) {
        std::cout << s.label << ": Se@FPr=" << format_double(cfg.eval.fpr_budget) << " "
                  << format_double(s.se_at_budget) << "\n";
      }
      for (const auto& p : report.pairs) std::cout << p.a << " vs " << p.b << ": p=" << format_double(p.p) << "\n";
    } else if (*abl) {
      const fs::path out = abl_out.empty() ? work / "ablation" : fs::path(abl_out);
      guard_output(out / "ablation.json", common.force);
      const EvalReport report = run_ablation(cfg, out, reduced);
      for (const auto& s : report.sets) std::cout << s.label << " " << format_double(s.se_at_budget) << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

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

#include "vmae/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "vmae/rng.hpp"

namespace vmae {
using nlohmann::json;

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool by_score_desc(const Detection& a, const Detection& b) { return a.score > b.score; }
}  // namespace

void CasePredictions::sort_by_score() { std::stable_sort(detections.begin(), detections.end(), by_score_desc); }

std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold) {
  std::stable_sort(detections.begin(), detections.end(), by_score_desc);
  std::vector<Detection> kept;
  for (const auto& d : detections) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(),
                                        [&](const Detection& k) { return cube_iou(k.cube(), d.cube()) > iou_threshold; });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

LabeledCase match_detections(const CasePredictions& preds, const std::vector<LesionGT>& gts, double t_iou) {
  LabeledCase out;
  out.case_id = preds.case_id;
  out.detections = preds.detections;
  std::stable_sort(out.detections.begin(), out.detections.end(), by_score_desc);
  out.gts = gts;
  out.gt_hit_score.assign(gts.size(), kNegInf);
  out.is_tp.assign(out.detections.size(), 0);
  out.claimed_gt.assign(out.detections.size(), -1);
  std::vector<uint8_t> claimed(gts.size(), 0);
  for (size_t i = 0; i < out.detections.size(); ++i) {
    int best = -1;
    double best_iou = -1.0;
    for (size_t g = 0; g < gts.size(); ++g) {
      if (claimed[g]) continue;
      const double iou = cube_iou(out.detections[i].cube(), gts[g].cube());
      if (iou > best_iou) {
        best_iou = iou;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0 && best_iou >= t_iou) {
      claimed[best] = 1;
      out.is_tp[i] = 1;
      out.claimed_gt[i] = best;
      out.gt_hit_score[best] = out.detections[i].score;
    }
  }
  return out;
}

FrocCurve froc(const std::vector<LabeledCase>& cases) {
  if (cases.empty()) throw Error("froc: evaluation set is empty");
  FrocCurve curve;
  curve.n_scans = static_cast<int64_t>(cases.size());
  struct Item {
    double score;
    bool tp;
  };
  std::vector<Item> items;
  for (const auto& c : cases) {
    curve.n_lesions += static_cast<int64_t>(c.gts.size());
    for (size_t i = 0; i < c.detections.size(); ++i) items.push_back({c.detections[i].score, c.is_tp[i] != 0});
  }
  if (curve.n_lesions == 0) throw Error("no lesions in evaluation set");
  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score > b.score; });

  if (items.empty()) {
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    return curve;
  }
  int64_t tp = 0, fp = 0;
  for (size_t i = 0; i < items.size();) {
    const double thr = items[i].score;
    while (i < items.size() && items[i].score == thr) {
      (items[i].tp ? tp : fp) += 1;
      ++i;
    }
    curve.points.push_back({thr, static_cast<double>(fp) / static_cast<double>(curve.n_scans),
                            static_cast<double>(tp) / static_cast<double>(curve.n_lesions)});
  }
  return curve;
}

FrocPoint operating_point(const FrocCurve& curve, double fpr_budget) {
  if (fpr_budget < 0.0 || std::isnan(fpr_budget)) throw Error("se_at_fpr: negative false-positive budget");
  if (curve.points.empty()) throw Error("se_at_fpr: empty curve");
  FrocPoint best{std::numeric_limits<double>::infinity(), 0.0, 0.0};
  bool found = false;
  for (const auto& p : curve.points) {
    if (p.fpr > fpr_budget) continue;
    if (!found || p.se > best.se) {
      best = p;
      found = true;
    }
  }
  return best;
}

double se_at_fpr(const FrocCurve& curve, double fpr_budget) { return operating_point(curve, fpr_budget).se; }

PatientMetrics patient_metrics(const std::vector<LabeledCase>& cases, double threshold) {
  PatientMetrics m;
  for (const auto& c : cases) {
    if (c.healthy()) {
      ++m.healthy_total;
      const bool clean = std::none_of(c.detections.begin(), c.detections.end(),
                                      [&](const Detection& d) { return d.score >= threshold; });
      if (clean) ++m.healthy_clean;
    } else {
      ++m.diseased_total;
      bool hit = false;
      for (size_t i = 0; i < c.detections.size(); ++i) hit |= c.is_tp[i] && c.detections[i].score >= threshold;
      if (hit) ++m.diseased_detected;
    }
  }
  if (m.diseased_total > 0) m.p_se = static_cast<double>(m.diseased_detected) / static_cast<double>(m.diseased_total);
  if (m.healthy_total > 0) m.p_sp = static_cast<double>(m.healthy_clean) / static_cast<double>(m.healthy_total);
  return m;
}

std::array<std::optional<double>, 3> strata_sensitivity(const std::vector<LabeledCase>& cases, double threshold,
                                                        std::array<double, 2> edges) {
  std::array<int64_t, 3> hit{}, total{};
  for (const auto& c : cases) {
    for (size_t g = 0; g < c.gts.size(); ++g) {
      const double d = c.gts[g].diameter_mm;
      const int band = d < edges[0] ? 0 : (d < edges[1] ? 1 : 2);
      ++total[band];
      if (c.gt_hit_score[g] >= threshold) ++hit[band];
    }
  }
  std::array<std::optional<double>, 3> out;
  for (int b = 0; b < 3; ++b) {
    if (total[b] > 0) out[b] = static_cast<double>(hit[b]) / static_cast<double>(total[b]);
  }
  return out;
}

std::vector<uint8_t> lesion_hits(const std::vector<LabeledCase>& cases, double threshold) {
  std::vector<uint8_t> hits;
  for (const auto& c : cases) {
    for (double s : c.gt_hit_score) hits.push_back(s >= threshold ? 1 : 0);
  }
  return hits;
}

double permutation_test(const std::vector<uint8_t>& hits_a, const std::vector<uint8_t>& hits_b, int64_t n_perm,
                        uint64_t seed) {
  if (hits_a.size() != hits_b.size()) {
    throw Error("permutation_test: hit vectors differ in length (" + std::to_string(hits_a.size()) + " vs " +
                std::to_string(hits_b.size()) + ")");
  }
  if (n_perm < 1) throw Error("permutation_test: n_perm must be >= 1");
  std::vector<int> diff;
  for (size_t i = 0; i < hits_a.size(); ++i) {
    const int d = static_cast<int>(hits_a[i] != 0) - static_cast<int>(hits_b[i] != 0);
    if (d != 0) diff.push_back(d);
  }
  int64_t observed = 0;
  for (int d : diff) observed += d;
  observed = std::llabs(observed);

  // Zero differences flip to themselves, so only non-zero entries consume signs.
  Rng rng = Rng::derive(seed, {0x7065726dull});
  int64_t extreme = 0;
  for (int64_t p = 0; p < n_perm; ++p) {
    int64_t s = 0;
    uint64_t bits = 0;
    for (size_t i = 0; i < diff.size(); ++i) {
      if (i % 64 == 0) bits = rng.next();
      s += (bits & 1ull) ? diff[i] : -diff[i];
      bits >>= 1;
    }
    if (std::llabs(s) >= observed) ++extreme;
  }
  return static_cast<double>(extreme + 1) / static_cast<double>(n_perm + 1);
}

void write_predictions(const std::filesystem::path& path, const std::vector<CasePredictions>& preds,
                       const std::string& config_echo_json) {
  json j;
  if (!config_echo_json.empty()) j["config"] = json::parse(config_echo_json);
  j["predictions"] = json::array();
  for (const auto& p : preds) {
    json dets = json::array();
    for (const auto& d : p.detections) {
      dets.push_back({{"score", d.score}, {"center_mm", d.center_mm}, {"side_mm", d.side_mm}});
    }
    j["predictions"].push_back({{"case_id", p.case_id}, {"detections", dets}});
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

std::vector<CasePredictions> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open predictions " + path.string());
  std::vector<CasePredictions> out;
  try {
    const json j = json::parse(in);
    for (const auto& p : j.at("predictions")) {
      CasePredictions cp;
      cp.case_id = p.at("case_id").get<std::string>();
      for (const auto& d : p.at("detections")) {
        Detection det;
        det.score = d.at("score").get<double>();
        det.center_mm = d.at("center_mm").get<Vec3>();
        det.side_mm = d.at("side_mm").get<double>();
        cp.detections.push_back(det);
      }
      cp.sort_by_score();
      out.push_back(std::move(cp));
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": malformed predictions: " + e.what());
  }
  return out;
}

}  // namespace vmae

#include "weedpilot/fieldsim/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "weedpilot/eval/metrics.hpp"

namespace weedpilot::fieldsim {

using json = nlohmann::json;

Classifier oracle_classifier(const ClassTaxonomy& tax) {
  return [&tax](const ImageTensor&, int ground_truth) {
    deploy::ClassPrediction p;
    p.class_id = ground_truth;
    p.class_name = tax.name_of(ground_truth);
    p.probabilities.assign(static_cast<std::size_t>(tax.num_classes()), 1e-7f);
    p.probabilities[ground_truth] = 1.f - 1e-7f;
    p.probability = p.probabilities[ground_truth];
    return p;
  };
}

Classifier engine_classifier(const deploy::InferenceEngine& engine) {
  return [&engine](const ImageTensor& frame, int) { return engine.infer(frame); };
}

RunReport simulate_run(const FieldMap& field, const ClassTaxonomy& tax,
                       const Classifier& classify, const SimConfig& cfg) {
  field.validate(tax);
  if (cfg.duration_s <= 0) throw Error("simulate: duration must be positive");
  if (cfg.speed_mps <= 0) throw Error("simulate: speed must be positive");

  const double horizon_s = std::min(cfg.duration_s, field.length_m / cfg.speed_mps);
  const long long total_frames = static_cast<long long>(std::floor(horizon_s * cfg.fps)) + 1;

  struct FrameInfo {
    int gt = 0;
    int patch = -1;
    double lateral = 0.0;
  };
  std::vector<FrameInfo> info(static_cast<std::size_t>(total_frames));

  RobotState robot;
  robot.speed_mps = cfg.speed_mps;
  robot.camera_height_m = cfg.camera_height_m;
  robot.validate();

  deploy::FrameSource source = [&](long long i) -> std::optional<ImageTensor> {
    if (i >= total_frames) return std::nullopt;
    RobotState st = robot;
    st.position_m = cfg.speed_mps * (static_cast<double>(i) / cfg.fps);
    RenderedFrame rf = render_frame(field, tax, st, derive_seed(cfg.seed, 0xF2, i));
    auto& fi = info[static_cast<std::size_t>(i)];
    fi.gt = rf.ground_truth;
    fi.patch = rf.patch_index;
    fi.lateral = rf.patch_index >= 0 ? field.patches[rf.patch_index].lateral_m : 0.0;
    return rf.image;
  };

  deploy::InferFn infer = [&](const ImageTensor& frame, long long i) {
    return classify(frame, info[static_cast<std::size_t>(i)].gt);
  };

  RunReport report;
  std::vector<std::pair<double, double>> spray_intervals;
  std::map<int, std::vector<int>> patch_preds;
  std::map<int, bool> patch_sprayed;
  std::vector<int> frame_gt, frame_pred;

  deploy::PredictionSink sink = [&](long long i, double t_emit, const deploy::ClassPrediction& pred) {
    const FrameInfo& fi = info[static_cast<std::size_t>(i)];
    SprayCommand cmd = spray_decide(pred, cfg.policy, fi.lateral);
    if (cmd.spray) {
      const double a = t_emit, b = t_emit + cmd.duration_s;
      if (!spray_intervals.empty() && a <= spray_intervals.back().second)
        spray_intervals.back().second = std::max(spray_intervals.back().second, b);
      else
        spray_intervals.emplace_back(a, b);
      if (fi.patch >= 0) patch_sprayed[fi.patch] = true;
      if (fi.gt == cfg.policy.crop_class_id || fi.gt == cfg.policy.negative_class_id)
        ++report.false_sprays;
    }
    if (fi.patch >= 0) patch_preds[fi.patch].push_back(pred.class_id);
    frame_gt.push_back(fi.gt);
    frame_pred.push_back(pred.class_id);
    report.events.push_back(
        {static_cast<double>(i) / cfg.fps, fi.gt, pred.class_id, cmd.spray});
  };

  deploy::PipelineConfig pc;
  pc.fps = cfg.fps;
  report.pipeline = deploy::run_pipeline_virtual(source, infer, cfg.infer_time_s, sink, pc);
  report.run_s = static_cast<double>(total_frames) / cfg.fps;

  for (const auto& [a, b] : spray_intervals) report.spray_s += b - a;
  report.herbicide_ml = kSprayerFluxMlPerMin * (report.spray_s / 60.0);
  report.baseline_ml = kBaselineFluxMlPerMin * (report.run_s / 60.0);

  // Patch bookkeeping over traversed patches only.
  std::map<int, int> traversed;  // patch -> frame count
  for (const auto& fi : info)
    if (fi.patch >= 0) traversed[fi.patch]++;
  report.patches_total = static_cast<int>(traversed.size());
  int patch_correct = 0;
  for (const auto& [pi, _] : traversed) {
    if (patch_sprayed.count(pi)) ++report.patches_sprayed;
    auto it = patch_preds.find(pi);
    if (it == patch_preds.end()) continue;  // every frame of this patch was dropped
    std::map<int, int> votes;
    for (int c : it->second) votes[c]++;
    int mode = it->second.front(), best = 0;
    for (const auto& [c, n] : votes)
      if (n > best) {
        best = n;
        mode = c;
      }
    if (mode == field.patches[pi].class_id) ++patch_correct;
  }
  report.patches_missed = report.patches_total - report.patches_sprayed;
  report.per_patch_accuracy =
      report.patches_total > 0 ? static_cast<double>(patch_correct) / report.patches_total : 1.0;

  if (!frame_gt.empty()) {
    eval::ConfusionMatrix cm = eval::confusion_matrix(frame_pred, frame_gt, tax.num_classes());
    report.per_frame_accuracy = eval::overall_accuracy(cm);
    for (int c = 0; c < tax.num_classes(); ++c)
      if (cm.row_sum(c) > 0)
        report.per_class_frame_accuracy[tax.name_of(c)] =
            static_cast<double>(cm.at(c, c)) / cm.row_sum(c);
  }
  return report;
}

json RunReport::to_json(const ClassTaxonomy&) const {
  json per_class(per_class_frame_accuracy);
  return json{{"per_class_frame_accuracy", per_class},
              {"per_frame_accuracy", per_frame_accuracy},
              {"per_patch_accuracy", per_patch_accuracy},
              {"patches_total", patches_total},
              {"patches_sprayed", patches_sprayed},
              {"patches_missed", patches_missed},
              {"false_sprays", false_sprays},
              {"spray_s", spray_s},
              {"herbicide_ml", herbicide_ml},
              {"baseline_ml", baseline_ml},
              {"run_s", run_s},
              {"pipeline", pipeline.to_json()}};
}

Scenario medium_density_scenario(const ClassTaxonomy& tax, std::uint64_t seed) {
  Scenario s;
  s.speed_mps = 0.5;
  s.field.length_m = 15.0;
  s.field.row_spacing_m = 0.25;
  s.field.seed = derive_seed(seed, 0xF1E1D);
  const int vm = tax.id_of("VM."), ct = tax.id_of("CT.");
  if (vm < 0 || ct < 0) throw Error("medium scenario needs VM. and CT. classes");
  Rng rng(derive_seed(seed, 0x5ce));
  double pos = 1.0;
  bool venus = true;
  while (pos < 13.5) {
    WeedPatch p;
    p.pos_m = pos;
    p.class_id = venus ? vm : ct;
    p.radius_m = rng.uniform(0.25, 0.40);
    p.lateral_m = rng.uniform(-0.10, 0.10);
    s.field.patches.push_back(p);
    pos += p.radius_m + rng.uniform(0.9, 1.4);
    venus = !venus;
  }
  s.field.bare.push_back({4.8, 5.4});
  s.field.bare.push_back({10.6, 11.2});
  // Keep bare stretches clear of patches so ground truth stays unambiguous.
  auto in_bare = [&](const WeedPatch& p) {
    for (const auto& b : s.field.bare)
      if (p.pos_m + p.radius_m > b.start_m - 0.1 && p.pos_m - p.radius_m < b.end_m + 0.1)
        return true;
    return false;
  };
  std::erase_if(s.field.patches, in_bare);
  return s;
}

std::string RunReport::events_csv(const ClassTaxonomy& tax) const {
  std::ostringstream out;
  out << "t,ground_truth,prediction,sprayed\n";
  char buf[160];
  for (const auto& e : events) {
    std::snprintf(buf, sizeof buf, "%.3f,%s,%s,%d\n", e.t_s, tax.name_of(e.ground_truth).c_str(),
                  tax.name_of(e.prediction).c_str(), e.sprayed ? 1 : 0);
    out << buf;
  }
  return out.str();
}

}  // namespace weedpilot::fieldsim

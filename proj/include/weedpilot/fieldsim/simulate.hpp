#ifndef WEEDPILOT_FIELDSIM_SIMULATE_HPP
#define WEEDPILOT_FIELDSIM_SIMULATE_HPP

#include <functional>
#include <map>

#include "weedpilot/deploy/pipeline.hpp"
#include "weedpilot/fieldsim/controller.hpp"
#include "weedpilot/fieldsim/render.hpp"

namespace weedpilot::fieldsim {

constexpr double kSprayerFluxMlPerMin = 78.0;    // customized pressurized sprayer
constexpr double kBaselineFluxMlPerMin = 95.6;   // commercial two-sprayer system

struct SimConfig {
  double fps = 10.0;
  double speed_mps = 0.5;
  double duration_s = 30.0;  // capped by field length / speed
  double camera_height_m = 0.3;
  double infer_time_s = 0.0;  // virtual inference service time
  std::uint64_t seed = 0;
  SprayPolicy policy;
};

struct SimEvent {
  double t_s = 0.0;
  int ground_truth = 0;
  int prediction = 0;
  bool sprayed = false;
};

struct RunReport {
  std::map<std::string, double> per_class_frame_accuracy;
  double per_frame_accuracy = 0.0;
  double per_patch_accuracy = 0.0;
  int patches_total = 0;
  int patches_sprayed = 0;
  int patches_missed = 0;
  long long false_sprays = 0;
  double spray_s = 0.0;
  double herbicide_ml = 0.0;   // kSprayerFluxMlPerMin * spray minutes, exact
  double baseline_ml = 0.0;    // continuous spraying for the whole run
  double run_s = 0.0;
  deploy::PipelineStats pipeline;
  std::vector<SimEvent> events;

  nlohmann::json to_json(const ClassTaxonomy& tax) const;
  std::string events_csv(const ClassTaxonomy& tax) const;
};

using Classifier = std::function<deploy::ClassPrediction(const ImageTensor&, int ground_truth)>;

// Ground-truth passthrough, for isolating controller correctness.
Classifier oracle_classifier(const ClassTaxonomy& tax);
Classifier engine_classifier(const deploy::InferenceEngine& engine);

// Virtual-clock classify-and-spray loop at cfg.fps: render -> pipeline ->
// spray_decide -> actuate, with exact herbicide accounting.
RunReport simulate_run(const FieldMap& field, const ClassTaxonomy& tax,
                       const Classifier& classify, const SimConfig& cfg);

// 15 m flax run with medium VM./CT. density plus a few bare stretches,
// mirroring the field-test setup.
Scenario medium_density_scenario(const ClassTaxonomy& tax, std::uint64_t seed);

}  // namespace weedpilot::fieldsim

#endif

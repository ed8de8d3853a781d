#ifndef WEEDPILOT_FIELDSIM_CONTROLLER_HPP
#define WEEDPILOT_FIELDSIM_CONTROLLER_HPP

#include "weedpilot/deploy/engine.hpp"
#include "weedpilot/fieldsim/field.hpp"

namespace weedpilot::fieldsim {

struct SprayPolicy {
  double threshold = 0.5;   // abstain below this argmax probability
  double pulse_s = 0.3;     // fixed pulse per trigger
  int crop_class_id = 6;
  int negative_class_id = 8;
  double yaw_center_deg = 90.0;
  double yaw_gain_deg_per_m = 120.0;  // lateral offset -> gimbal bearing

  static SprayPolicy for_taxonomy(const ClassTaxonomy& tax, double threshold = 0.5) {
    SprayPolicy p;
    p.threshold = threshold;
    p.crop_class_id = tax.crop_class_id();
    p.negative_class_id = tax.negative_class_id();
    return p;
  }
};

struct SprayCommand {
  bool spray = false;
  double target_yaw_deg = 90.0;  // always within [0, 150]
  double duration_s = 0.0;
};

// Spray iff the prediction is a weed (not crop, not negative) at or above
// the confidence threshold. Yaw tracks the target bearing, clamped.
SprayCommand spray_decide(const deploy::ClassPrediction& prediction, const SprayPolicy& policy,
                          double target_lateral_m = 0.0);

}  // namespace weedpilot::fieldsim

#endif

#include "weedpilot/fieldsim/controller.hpp"

namespace weedpilot::fieldsim {

SprayCommand spray_decide(const deploy::ClassPrediction& prediction, const SprayPolicy& policy,
                          double target_lateral_m) {
  SprayCommand cmd;
  cmd.target_yaw_deg =
      clamp_yaw(policy.yaw_center_deg + policy.yaw_gain_deg_per_m * target_lateral_m);
  const bool is_weed = prediction.class_id != policy.crop_class_id &&
                       prediction.class_id != policy.negative_class_id;
  if (is_weed && prediction.probability >= policy.threshold) {
    cmd.spray = true;
    cmd.duration_s = policy.pulse_s;
  }
  return cmd;
}

}  // namespace weedpilot::fieldsim

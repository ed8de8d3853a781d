#ifndef WEEDPILOT_FIELDSIM_FIELD_HPP
#define WEEDPILOT_FIELDSIM_FIELD_HPP

#include <nlohmann/json.hpp>

#include <cstdint>
#include <vector>

#include "weedpilot/taxonomy.hpp"

namespace weedpilot::fieldsim {

struct WeedPatch {
  double pos_m = 0.0;      // along the row
  int class_id = 0;        // never the crop class
  double radius_m = 0.25;
  double lateral_m = 0.0;  // offset from the row center, for yaw targeting
};

// Sections without crop rows; frames there ground-truth as negatives.
struct BareInterval {
  double start_m = 0.0;
  double end_m = 0.0;
};

struct FieldMap {
  double row_spacing_m = 0.25;  // flax rows, 0.2-0.3 m apart
  double length_m = 15.0;
  std::vector<WeedPatch> patches;
  std::vector<BareInterval> bare;
  double lighting = 1.0;  // > 1 washes colors out (strong-exposure case)
  double shadow = 0.15;
  std::uint64_t seed = 0;  // world texture

  void validate(const ClassTaxonomy& tax) const;

  // Dominant patch under the robot, or -1.
  int patch_at(double pos_m) const;
  bool is_bare(double pos_m) const;

  nlohmann::json to_json(const ClassTaxonomy& tax) const;
  static FieldMap from_json(const nlohmann::json& j, const ClassTaxonomy& tax);
};

// Scenario file: field plus the drive parameters.
struct Scenario {
  FieldMap field;
  double speed_mps = 0.5;

  static Scenario load(const std::string& path, const ClassTaxonomy& tax);
  void save(const std::string& path, const ClassTaxonomy& tax) const;
};

struct RobotState {
  double position_m = 0.0;
  double speed_mps = 0.5;
  double camera_height_m = 0.3;  // 0.2-0.4 m above ground
  double gimbal_yaw_deg = 90.0;  // clamped to [0, 150]
  double tank_remaining_ml = 1.0e6;
  bool sprayer_on = false;

  void validate() const;
};

double clamp_yaw(double yaw_deg);

}  // namespace weedpilot::fieldsim

#endif

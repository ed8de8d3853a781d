#include "weedpilot/fieldsim/field.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace weedpilot::fieldsim {

using json = nlohmann::json;

double clamp_yaw(double yaw_deg) { return std::clamp(yaw_deg, 0.0, 150.0); }

void FieldMap::validate(const ClassTaxonomy& tax) const {
  if (row_spacing_m < 0.2 || row_spacing_m > 0.3)
    throw Error("field: row spacing must be within [0.2, 0.3] m");
  if (length_m <= 0) throw Error("field: length must be positive");
  for (const auto& p : patches) {
    if (p.class_id < 0 || p.class_id >= tax.num_classes())
      throw Error("field: patch class id out of range");
    if (p.class_id == tax.crop_class_id())
      throw Error("field: weed patch cannot carry the crop class");
    if (p.radius_m <= 0) throw Error("field: patch radius must be positive");
    if (p.pos_m < 0 || p.pos_m > length_m) throw Error("field: patch outside field bounds");
  }
}

int FieldMap::patch_at(double pos_m) const {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < patches.size(); ++i) {
    double d = std::fabs(pos_m - patches[i].pos_m);
    if (d <= patches[i].radius_m && d < best_d) {
      best = static_cast<int>(i);
      best_d = d;
    }
  }
  return best;
}

bool FieldMap::is_bare(double pos_m) const {
  for (const auto& b : bare)
    if (pos_m >= b.start_m && pos_m < b.end_m) return true;
  return false;
}

json FieldMap::to_json(const ClassTaxonomy& tax) const {
  json patches_j = json::array();
  for (const auto& p : patches)
    patches_j.push_back({{"pos_m", p.pos_m},
                         {"class", tax.name_of(p.class_id)},
                         {"radius_m", p.radius_m},
                         {"lateral_m", p.lateral_m}});
  json bare_j = json::array();
  for (const auto& b : bare) bare_j.push_back({{"start_m", b.start_m}, {"end_m", b.end_m}});
  return json{{"row_spacing_m", row_spacing_m}, {"length_m", length_m},
              {"patches", patches_j},           {"bare", bare_j},
              {"lighting", lighting},           {"shadow", shadow},
              {"seed", seed}};
}

FieldMap FieldMap::from_json(const json& j, const ClassTaxonomy& tax) {
  FieldMap f;
  f.row_spacing_m = j.value("row_spacing_m", 0.25);
  f.length_m = j.value("length_m", 15.0);
  f.lighting = j.value("lighting", 1.0);
  f.shadow = j.value("shadow", 0.15);
  f.seed = j.value("seed", 0ULL);
  if (j.contains("patches"))
    for (const auto& p : j.at("patches")) {
      WeedPatch w;
      w.pos_m = p.at("pos_m").get<double>();
      const auto& cls = p.at("class");
      if (cls.is_string()) {
        w.class_id = tax.id_of(cls.get<std::string>());
        if (w.class_id < 0) throw Error("field: unknown class \"" + cls.get<std::string>() + "\"");
      } else {
        w.class_id = cls.get<int>();
      }
      w.radius_m = p.at("radius_m").get<double>();
      w.lateral_m = p.value("lateral_m", 0.0);
      f.patches.push_back(w);
    }
  if (j.contains("bare"))
    for (const auto& b : j.at("bare"))
      f.bare.push_back({b.at("start_m").get<double>(), b.at("end_m").get<double>()});
  f.validate(tax);
  return f;
}

Scenario Scenario::load(const std::string& path, const ClassTaxonomy& tax) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read scenario " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error("scenario " + path + ": malformed JSON");
  Scenario s;
  s.field = FieldMap::from_json(j, tax);
  s.speed_mps = j.value("speed_mps", 0.5);
  if (s.speed_mps <= 0) throw Error("scenario: speed must be positive");
  return s;
}

void Scenario::save(const std::string& path, const ClassTaxonomy& tax) const {
  json j = field.to_json(tax);
  j["speed_mps"] = speed_mps;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write scenario " + path);
  out << j.dump(2) << "\n";
}

void RobotState::validate() const {
  if (camera_height_m < 0.2 || camera_height_m > 0.4)
    throw Error("robot: camera height must be within [0.2, 0.4] m");
  if (gimbal_yaw_deg < 0 || gimbal_yaw_deg > 150)
    throw Error("robot: gimbal yaw must be within [0, 150] degrees");
  if (tank_remaining_ml < 0) throw Error("robot: tank cannot be negative");
}

}  // namespace weedpilot::fieldsim

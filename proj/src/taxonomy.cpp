#include "weedpilot/taxonomy.hpp"

#include <nlohmann/json.hpp>

#include <set>

namespace weedpilot {

using json = nlohmann::json;

ClassTaxonomy::ClassTaxonomy(std::vector<ClassInfo> classes, int negative_id, int crop_id)
    : classes_(std::move(classes)), negative_id_(negative_id), crop_id_(crop_id) {
  if (classes_.empty()) throw Error("taxonomy: no classes");
  std::set<std::string> names;
  for (int i = 0; i < static_cast<int>(classes_.size()); ++i) {
    if (classes_[i].id != i) throw Error("taxonomy: ids must be dense 0..n-1");
    if (!names.insert(classes_[i].short_name).second)
      throw Error("taxonomy: duplicate short name " + classes_[i].short_name);
  }
  auto in_range = [&](int id) { return id >= 0 && id < static_cast<int>(classes_.size()); };
  if (!in_range(negative_id_) || !in_range(crop_id_) || negative_id_ == crop_id_)
    throw Error("taxonomy: negative/crop ids must be distinct members");
}

const ClassTaxonomy& ClassTaxonomy::aiweeds16() {
  // 15 field classes plus crabgrass to fill out the 16-way head.
  static const ClassTaxonomy tax(
      {
          {0, "AS.", "Amaranthus spinosus"},
          {1, "BS.", "Brachypodium sylvaticum"},
          {2, "CT.", "Canada thistle"},
          {3, "CA.", "Cirsium arvense"},
          {4, "CD.", "Cynodon dactylon"},
          {5, "D.", "Dandelion"},
          {6, "Flax", "Flax"},
          {7, "L.", "Lambsquarters"},
          {8, "Neg.", "Negatives"},
          {9, "N.", "Nutsedge"},
          {10, "PM.", "Plantago major"},
          {11, "SF.", "Setaria faberi"},
          {12, "SA.", "Sonchus arvensis"},
          {13, "VM.", "Venus mallow"},
          {14, "VP.", "Verdolagas purslane"},
          {15, "CG.", "Crabgrass"},
      },
      /*negative_id=*/8, /*crop_id=*/6);
  return tax;
}

const ClassInfo& ClassTaxonomy::cls(int id) const {
  if (id < 0 || id >= num_classes()) throw Error("taxonomy: class id out of range");
  return classes_[id];
}

int ClassTaxonomy::id_of(const std::string& short_name) const {
  for (const auto& c : classes_)
    if (c.short_name == short_name) return c.id;
  return -1;
}

std::string ClassTaxonomy::to_json() const {
  json arr = json::array();
  for (const auto& c : classes_)
    arr.push_back({{"id", c.id}, {"short", c.short_name}, {"full", c.full_name}});
  return arr.dump();
}

ClassTaxonomy ClassTaxonomy::from_json(const std::string& text) {
  json arr = json::parse(text);
  std::vector<ClassInfo> classes;
  for (const auto& e : arr)
    classes.push_back({e.at("id").get<int>(), e.at("short").get<std::string>(),
                       e.at("full").get<std::string>()});
  // Negative/crop ids are structural, not per-file: resolve by name.
  int neg = -1, crop = -1;
  for (const auto& c : classes) {
    if (c.short_name == "Neg.") neg = c.id;
    if (c.short_name == "Flax") crop = c.id;
  }
  if (neg < 0 || crop < 0) throw Error("taxonomy file lacks Neg./Flax entries");
  return ClassTaxonomy(std::move(classes), neg, crop);
}

}  // namespace weedpilot

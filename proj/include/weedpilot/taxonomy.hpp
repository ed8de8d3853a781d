#ifndef WEEDPILOT_TAXONOMY_HPP
#define WEEDPILOT_TAXONOMY_HPP

#include <string>
#include <vector>

#include "weedpilot/core.hpp"

namespace weedpilot {

struct ClassInfo {
  int id = 0;
  std::string short_name;
  std::string full_name;
};

// The 16-class label space: 14 weeds, flax (the crop), and a negative
// background class. Ids are dense 0..15.
class ClassTaxonomy {
 public:
  ClassTaxonomy(std::vector<ClassInfo> classes, int negative_id, int crop_id);

  static const ClassTaxonomy& aiweeds16();

  int num_classes() const { return static_cast<int>(classes_.size()); }
  const std::vector<ClassInfo>& classes() const { return classes_; }
  const ClassInfo& cls(int id) const;
  int negative_class_id() const { return negative_id_; }
  int crop_class_id() const { return crop_id_; }

  // -1 when the short name is unknown.
  int id_of(const std::string& short_name) const;
  const std::string& name_of(int id) const { return cls(id).short_name; }

  std::string to_json() const;
  static ClassTaxonomy from_json(const std::string& text);

 private:
  std::vector<ClassInfo> classes_;
  int negative_id_ = 0;
  int crop_id_ = 0;
};

}  // namespace weedpilot

#endif

#ifndef WEEDPILOT_MANIFEST_HPP
#define WEEDPILOT_MANIFEST_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "weedpilot/taxonomy.hpp"

namespace weedpilot {

enum class Role { none, train, val, test };

const char* role_name(Role r);
Role role_from_name(const std::string& s);

// Parameters of one procedurally generated sample. Everything about the
// rendered image derives from (class_id, seed, height, width).
struct GenSource {
  std::uint64_t seed = 0;
  int height = 0;
  int width = 0;
};

struct Sample {
  // Exactly one of path / gen is set.
  std::string path;
  std::optional<GenSource> gen;
  int class_id = 0;
  int width = 0;
  int height = 0;
  Role role = Role::none;
  int fold = -1;  // -1 = unassigned / not in any fold (test samples)

  bool is_generated() const { return gen.has_value(); }
};

struct SkipReport {
  std::vector<std::string> skipped;  // undecodable files, with reason
};

class Manifest {
 public:
  explicit Manifest(ClassTaxonomy taxonomy) : taxonomy_(std::move(taxonomy)) {}

  const ClassTaxonomy& taxonomy() const { return taxonomy_; }
  const std::vector<Sample>& samples() const { return samples_; }
  std::vector<Sample>& samples() { return samples_; }
  void add(Sample s);

  std::map<int, int> per_class_counts() const;
  int count_of(int class_id) const;

  // JSON Lines, one record per sample, UTF-8, LF endings.
  void save_jsonl(const std::string& path) const;
  static Manifest load_jsonl(const std::string& path, const ClassTaxonomy& taxonomy);

 private:
  ClassTaxonomy taxonomy_;
  std::vector<Sample> samples_;
};

// Scans root/<class-folder>/ for decodable images. Folder names are the
// lowercased short names with the trailing dot stripped ("Neg." -> "neg");
// the exact short name is accepted too. A missing class folder is a
// taxonomy error; undecodable files land in the skip report.
Manifest build_manifest(const std::string& root, const ClassTaxonomy& taxonomy,
                        SkipReport* skips = nullptr);

std::string class_folder_name(const std::string& short_name);

}  // namespace weedpilot

#endif

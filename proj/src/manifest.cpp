#include "weedpilot/manifest.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>

#include "weedpilot/png_io.hpp"

namespace weedpilot {

namespace fs = std::filesystem;
using json = nlohmann::json;

const char* role_name(Role r) {
  switch (r) {
    case Role::train: return "train";
    case Role::val: return "val";
    case Role::test: return "test";
    default: return "";
  }
}

Role role_from_name(const std::string& s) {
  if (s == "train") return Role::train;
  if (s == "val") return Role::val;
  if (s == "test") return Role::test;
  if (s.empty()) return Role::none;
  throw Error("unknown role: " + s);
}

void Manifest::add(Sample s) {
  if (s.class_id < 0 || s.class_id >= taxonomy_.num_classes())
    throw Error("sample class_id out of range");
  if (s.width <= 0 || s.height <= 0) throw Error("sample dimensions must be positive");
  samples_.push_back(std::move(s));
}

std::map<int, int> Manifest::per_class_counts() const {
  std::map<int, int> counts;
  for (int c = 0; c < taxonomy_.num_classes(); ++c) counts[c] = 0;
  for (const auto& s : samples_) counts[s.class_id]++;
  return counts;
}

int Manifest::count_of(int class_id) const {
  int n = 0;
  for (const auto& s : samples_)
    if (s.class_id == class_id) ++n;
  return n;
}

void Manifest::save_jsonl(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  for (const auto& s : samples_) {
    json rec;
    if (s.is_generated()) {
      rec["gen"] = {{"seed", s.gen->seed}, {"h", s.gen->height}, {"w", s.gen->width}};
    } else {
      rec["path"] = s.path;
    }
    rec["class_id"] = s.class_id;
    rec["class_name"] = taxonomy_.name_of(s.class_id);
    rec["role"] = s.role == Role::none ? json(nullptr) : json(role_name(s.role));
    rec["fold"] = s.fold < 0 ? json(nullptr) : json(s.fold);
    out << rec.dump() << "\n";
  }
}

Manifest Manifest::load_jsonl(const std::string& path, const ClassTaxonomy& taxonomy) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  Manifest m(taxonomy);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded())
      throw Error(path + ":" + std::to_string(lineno) + ": malformed JSON record");
    Sample s;
    if (rec.contains("gen")) {
      const auto& g = rec.at("gen");
      s.gen = GenSource{g.at("seed").get<std::uint64_t>(), g.at("h").get<int>(),
                        g.at("w").get<int>()};
      s.height = s.gen->height;
      s.width = s.gen->width;
    } else {
      s.path = rec.at("path").get<std::string>();
      s.width = rec.value("w", 0);
      s.height = rec.value("h", 0);
      if (s.width <= 0) s.width = 1;   // dims of file-backed samples resolved at decode
      if (s.height <= 0) s.height = 1;
    }
    s.class_id = rec.at("class_id").get<int>();
    if (rec.contains("role") && !rec.at("role").is_null())
      s.role = role_from_name(rec.at("role").get<std::string>());
    if (rec.contains("fold") && !rec.at("fold").is_null())
      s.fold = rec.at("fold").get<int>();
    m.add(std::move(s));
  }
  return m;
}

std::string class_folder_name(const std::string& short_name) {
  std::string f;
  for (char ch : short_name)
    if (ch != '.') f.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  return f;
}

Manifest build_manifest(const std::string& root, const ClassTaxonomy& taxonomy,
                        SkipReport* skips) {
  if (!fs::is_directory(root)) throw Error("data root is not a directory: " + root);
  Manifest m(taxonomy);
  for (const auto& cls : taxonomy.classes()) {
    const std::string folder = class_folder_name(cls.short_name);
    fs::path dir = fs::path(root) / folder;
    if (!fs::is_directory(dir)) {
      fs::path alt = fs::path(root) / cls.short_name;
      if (fs::is_directory(alt))
        dir = alt;
      else
        throw Error("taxonomy error: missing class directory \"" + folder + "\"");
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      try {
        ImageTensor img = read_png(f.string());
        Sample s;
        s.path = f.string();
        s.class_id = cls.id;
        s.width = img.width;
        s.height = img.height;
        m.add(std::move(s));
      } catch (const Error& e) {
        if (skips) skips->skipped.push_back(f.string() + ": " + e.what());
      }
    }
  }
  for (const auto& [cls, n] : m.per_class_counts())
    if (n == 0)
      throw Error("taxonomy error: class \"" +
                  class_folder_name(taxonomy.name_of(cls)) + "\" has no decodable images");
  return m;
}

}  // namespace weedpilot

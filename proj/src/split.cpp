#include "weedpilot/split.hpp"

#include <cmath>
#include <map>

#include "weedpilot/rng.hpp"

namespace weedpilot {

SplitCounts split_counts(int n, std::array<double, 3> ratios) {
  SplitCounts c;
  c.train = static_cast<int>(std::floor(ratios[0] * n));
  c.val = static_cast<int>(std::floor(ratios[1] * n));
  c.test = n - c.train - c.val;
  return c;
}

SplitAssignment stratified_split(const Manifest& manifest, std::uint64_t seed, int k,
                                 std::array<double, 3> ratios) {
  if (k < 1) throw Error("stratified_split: k must be >= 1");
  const auto& samples = manifest.samples();
  const int nc = manifest.taxonomy().num_classes();

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < samples.size(); ++i) by_class[samples[i].class_id].push_back(i);

  for (int c = 0; c < nc; ++c) {
    auto it = by_class.find(c);
    int n = it == by_class.end() ? 0 : static_cast<int>(it->second.size());
    if (n < k)
      throw Error("insufficient data: class \"" + manifest.taxonomy().name_of(c) + "\" has " +
                  std::to_string(n) + " samples, need at least " + std::to_string(k));
  }

  SplitAssignment out;
  out.fold_count = k;
  out.ratios = ratios;
  out.roles.assign(samples.size(), Role::none);
  out.folds.assign(samples.size(), -1);
  out.pool_pos.assign(samples.size(), -1);

  for (auto& [cls, idx] : by_class) {
    Rng rng(derive_seed(seed, 0x5117u, static_cast<std::uint64_t>(cls)));
    rng.shuffle(idx);
    const int n = static_cast<int>(idx.size());
    const SplitCounts c = split_counts(n, ratios);
    const int pool = c.train + c.val;
    for (int j = 0; j < n; ++j) {
      std::size_t s = idx[j];
      if (j >= pool) {
        out.roles[s] = Role::test;  // fixed per seed, outside every fold
        continue;
      }
      out.pool_pos[s] = j;
      out.folds[s] = pool > 0 ? static_cast<int>((static_cast<long long>(j) * k) / pool) : 0;
      out.roles[s] = j < c.val ? Role::val : Role::train;
    }
  }
  return out;
}

Role SplitAssignment::role_in_fold(const Manifest& m, std::size_t sample_idx, int fold) const {
  if (fold < 0 || fold >= fold_count) throw Error("fold index out of range");
  if (roles[sample_idx] == Role::test) return Role::test;
  const int cls = m.samples()[sample_idx].class_id;
  int n = 0, pool = 0, val_n = 0;
  {
    int cnt = m.count_of(cls);
    n = cnt;
    SplitCounts c = split_counts(n, ratios);
    pool = c.train + c.val;
    val_n = c.val;
  }
  // Fold f's val block starts at floor(f * pool / k) and wraps cyclically.
  const int start = static_cast<int>((static_cast<long long>(fold) * pool) / fold_count);
  const int pos = pool_pos[sample_idx];
  const int rel = (pos - start + pool) % pool;
  return rel < val_n ? Role::val : Role::train;
}

void SplitAssignment::apply(Manifest& m) const {
  auto& samples = m.samples();
  if (samples.size() != roles.size()) throw Error("split does not match manifest size");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i].role = roles[i];
    samples[i].fold = folds[i];
  }
}

}  // namespace weedpilot

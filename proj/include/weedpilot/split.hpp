#ifndef WEEDPILOT_SPLIT_HPP
#define WEEDPILOT_SPLIT_HPP

#include <array>
#include <vector>

#include "weedpilot/manifest.hpp"

namespace weedpilot {

// Stratified 60-20-20 assignment. Per class of n samples:
//   |train| = floor(0.6 n), |val| = floor(0.2 n), |test| = the remainder.
// The test block is fixed per seed and never enters any fold; the k folds
// rotate the val block through the remaining train+val pool.
struct SplitAssignment {
  int fold_count = 5;
  std::array<double, 3> ratios{0.6, 0.2, 0.2};
  std::vector<Role> roles;       // per manifest sample, fold-0 view
  std::vector<int> folds;        // per sample: fold group in the pool, -1 for test
  std::vector<int> pool_pos;     // per sample: position in its class pool, -1 for test

  // Role the sample plays when fold `fold` serves as validation.
  Role role_in_fold(const Manifest& m, std::size_t sample_idx, int fold) const;

  void apply(Manifest& m) const;  // writes roles/folds onto the samples
};

// Pure function of (manifest, seed, k). Every class needs >= k samples.
SplitAssignment stratified_split(const Manifest& manifest, std::uint64_t seed, int k = 5,
                                 std::array<double, 3> ratios = {0.6, 0.2, 0.2});

struct SplitCounts {
  int train = 0, val = 0, test = 0;
};

// The floor rule, exposed for callers that need the exact per-class counts.
SplitCounts split_counts(int n, std::array<double, 3> ratios = {0.6, 0.2, 0.2});

}  // namespace weedpilot

#endif

#ifndef WEEDPILOT_AUGMENT_HPP
#define WEEDPILOT_AUGMENT_HPP

#include <array>
#include <cstdint>

#include "weedpilot/image.hpp"

namespace weedpilot {

template <typename T>
struct Range {
  T lo, hi;
  bool degenerate() const { return lo == hi; }
};

// The training-time augmentation policy. Geometric stages run first (flip,
// rotation, anisotropic scale, perspective), then photometric ones
// (per-channel shift, global shift, intensity scale). All stages clamp to
// [0,255]; identity ranges make the whole policy the identity.
struct AugmentationPolicy {
  Range<double> rotation_deg{-360.0, 360.0};
  Range<double> scale_x{0.5, 1.0};
  Range<double> scale_y{0.5, 1.0};
  Range<double> channel_shift{-25.0, 25.0};  // per channel
  Range<double> pixel_shift{-25.0, 25.0};    // one draw for all channels
  Range<double> intensity_scale{0.75, 1.25};
  double perspective_jitter = 0.1;  // max corner displacement / min(H,W)
  double flip_prob = 0.5;

  static AugmentationPolicy identity() {
    return {{0, 0}, {1, 1}, {1, 1}, {0, 0}, {0, 0}, {1, 1}, 0.0, 0.0};
  }
  static AugmentationPolicy paper_defaults() { return {}; }

  void validate() const;
};

// Bilinear resize to exactly (target_h, target_w); equal dims copy bitwise.
ImageTensor resize(const ImageTensor& img, int target_w = 384, int target_h = 224);

// Seed-deterministic: the same (img, policy, seed) always produces the same
// bytes. Geometric stages compose into a single homography so an identity
// policy is exactly the identity.
ImageTensor augment(const ImageTensor& img, const AugmentationPolicy& policy,
                    std::uint64_t rng_seed);

// Projective warp mapping the image quad's corners (TL, TR, BR, BL) to
// corner + offset. Out-of-source samples replicate the nearest edge pixel.
ImageTensor perspective_warp(const ImageTensor& img,
                             const std::array<std::array<double, 2>, 4>& corner_offsets);

// Row-major 3x3 homography sending the corner quad onto the offset quad.
// Throws on a degenerate (self-intersecting or collapsed) target quad.
std::array<double, 9> homography_from_offsets(
    int width, int height, const std::array<std::array<double, 2>, 4>& corner_offsets);

}  // namespace weedpilot

#endif

#include "weedpilot/fieldsim/render.hpp"

#include <cmath>
#include <cstring>

#include "weedpilot/synth.hpp"

namespace weedpilot::fieldsim {

namespace {

constexpr int kFrameH = 224;
constexpr int kFrameW = 384;

std::uint64_t bits_of(double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  return u;
}

}  // namespace

RenderedFrame render_frame(const FieldMap& field, const ClassTaxonomy& tax,
                           const RobotState& robot, std::uint64_t seed) {
  if (robot.position_m < 0 || robot.position_m > field.length_m)
    throw Error("render_frame: robot outside field");

  RenderedFrame out;
  out.patch_index = field.patch_at(robot.position_m);
  const bool bare = field.is_bare(robot.position_m);
  if (out.patch_index >= 0)
    out.ground_truth = field.patches[out.patch_index].class_id;
  else
    out.ground_truth = bare ? tax.negative_class_id() : tax.crop_class_id();

  Canvas canvas(kFrameH, kFrameW);
  const std::uint64_t frame_seed =
      derive_seed(field.seed, seed, bits_of(robot.position_m));
  paint::soil(canvas, derive_seed(frame_seed, 1));

  // Ground-plane scale: the camera sees roughly 2x its height across.
  const double view_w_m = 2.0 * robot.camera_height_m;
  const double px_per_m = kFrameW / view_w_m;

  if (!bare) {
    const double spacing_px = field.row_spacing_m * px_per_m;
    // The robot drives between rows, so row lines scroll with position.
    const double phase_px = robot.position_m * 37.0;  // texture variety only
    paint::flax_rows(canvas, derive_seed(field.seed, 2), static_cast<float>(spacing_px),
                     static_cast<float>(phase_px), 0.0f);
  }

  if (out.patch_index >= 0) {
    const WeedPatch& p = field.patches[out.patch_index];
    // Motif appearance is pinned to the patch so consecutive frames agree.
    const std::uint64_t patch_seed =
        derive_seed(field.seed, 3, static_cast<std::uint64_t>(out.patch_index));
    Rng prng(patch_seed);
    const float rot = static_cast<float>(prng.uniform(0.0, 6.283185307179586));
    const double closeness =
        1.0 - std::fabs(robot.position_m - p.pos_m) / p.radius_m;  // 0 edge, 1 center
    float scale = static_cast<float>(p.radius_m * px_per_m * (0.45 + 0.35 * closeness));
    scale = std::min(scale, 0.48f * kFrameH);
    const float cx = kFrameW * (0.5f + static_cast<float>(p.lateral_m * px_per_m / kFrameW));
    paint::class_motif(canvas, tax, p.class_id, patch_seed, cx, kFrameH * 0.52f, scale, rot);
  }

  paint::lighting(canvas, static_cast<float>(field.lighting),
                  static_cast<float>(Rng(derive_seed(frame_seed, 4)).uniform(0.0, 6.28318)),
                  static_cast<float>(field.shadow));
  const int blur_px = static_cast<int>(std::lround(robot.speed_mps * 4.0));
  if (blur_px > 0) paint::box_blur(canvas, blur_px, 0);
  paint::grain(canvas, derive_seed(frame_seed, 5), 3.0f);

  out.image = paint::quantize(canvas);
  return out;
}

}  // namespace weedpilot::fieldsim

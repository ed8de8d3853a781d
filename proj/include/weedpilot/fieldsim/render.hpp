#ifndef WEEDPILOT_FIELDSIM_RENDER_HPP
#define WEEDPILOT_FIELDSIM_RENDER_HPP

#include "weedpilot/fieldsim/field.hpp"
#include "weedpilot/image.hpp"

namespace weedpilot::fieldsim {

struct RenderedFrame {
  ImageTensor image;    // 224x384, the robot camera resolution
  int ground_truth = 0; // dominant patch class, crop, or negative
  int patch_index = -1; // dominant patch, -1 when over crop/bare ground
};

// Camera view from the robot's position. Shares the motif painters with the
// synthetic corpus generator, so models trained on the corpus transfer.
// Motion blur grows with speed; lighting/shadow come from the field.
RenderedFrame render_frame(const FieldMap& field, const ClassTaxonomy& tax,
                           const RobotState& robot, std::uint64_t seed);

}  // namespace weedpilot::fieldsim

#endif

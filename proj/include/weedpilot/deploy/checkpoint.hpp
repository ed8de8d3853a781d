#ifndef WEEDPILOT_DEPLOY_CHECKPOINT_HPP
#define WEEDPILOT_DEPLOY_CHECKPOINT_HPP

#include <string>

#include "weedpilot/nn/graph.hpp"

namespace weedpilot::deploy {

struct CheckpointMeta {
  int epoch = 0;
  double val_loss = 0.0;
};

// On-disk model: graph spec + named f32 tensors + training metadata.
//
// Binary layout (all integers little-endian):
//   magic "WPCK" | u32 version | u32 config_len | config JSON (UTF-8)
//   | u32 tensor_count | per tensor: u16 name_len, name, u8 ndim,
//     u32 dims..., f32 data...
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  nn::ModelGraph graph;
  nn::ParameterSet<float> params;
  CheckpointMeta meta;
  std::string taxonomy_json;  // the label space the model was trained on
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace weedpilot::deploy

#endif

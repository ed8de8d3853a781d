#ifndef WEEDPILOT_DEPLOY_ENGINE_HPP
#define WEEDPILOT_DEPLOY_ENGINE_HPP

#include <string>
#include <vector>

#include "weedpilot/deploy/checkpoint.hpp"
#include "weedpilot/image.hpp"
#include "weedpilot/taxonomy.hpp"

namespace weedpilot::deploy {

struct ClassPrediction {
  int class_id = 0;
  std::string class_name;
  std::vector<float> probabilities;  // one per class, in (0,1)
  float probability = 0.f;           // the argmax entry
  double latency_ms = 0.0;
};

// Frozen inference-only model: no BatchNorm layers, no training state,
// immutable and shareable read-only across threads.
class InferenceEngine {
 public:
  InferenceEngine(nn::ModelGraph graph, nn::ParameterSet<float> params, ClassTaxonomy taxonomy,
                  bool check_finite = false);

  static InferenceEngine from_checkpoint(const Checkpoint& ckpt, bool fold_if_needed = true);

  const nn::ModelGraph& graph() const { return graph_; }
  const nn::ParameterSet<float>& params() const { return params_; }
  const ClassTaxonomy& taxonomy() const { return taxonomy_; }
  std::array<int, 3> input_spec() const { return graph_.input; }  // C,H,W
  long long parameter_count() const { return params_.total_params(); }

  // Resizes the frame to the input spec if needed, normalizes u8/255 and
  // runs one infer-mode forward. Argmax ties break toward the lowest id.
  ClassPrediction infer(const ImageTensor& frame) const;

 private:
  nn::ModelGraph graph_;
  nn::Plan plan_;
  nn::ParameterSet<float> params_;
  ClassTaxonomy taxonomy_;
  bool check_finite_;
};

// Normalization used everywhere a raster meets the model.
nn::Tensor<float> image_to_input(const ImageTensor& img);

}  // namespace weedpilot::deploy

#endif

#include "weedpilot/deploy/engine.hpp"

#include <chrono>

#include "weedpilot/augment.hpp"
#include "weedpilot/deploy/fold.hpp"

namespace weedpilot::deploy {

nn::Tensor<float> image_to_input(const ImageTensor& img) {
  nn::Tensor<float> t(nn::Shape::of(1, img.channels, img.height, img.width));
  const float inv = 1.f / 255.f;
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) t.at4(0, c, y, x) = img.at(y, x, c) * inv;
  return t;
}

InferenceEngine::InferenceEngine(nn::ModelGraph graph, nn::ParameterSet<float> params,
                                 ClassTaxonomy taxonomy, bool check_finite)
    : graph_(std::move(graph)),
      plan_(nn::compile(graph_)),
      params_(std::move(params)),
      taxonomy_(std::move(taxonomy)),
      check_finite_(check_finite) {
  if (graph_.has_batchnorm())
    throw Error("inference engine: graph still contains batchnorm; run fold_batchnorm first");
  nn::validate_params(plan_, params_);
  if (taxonomy_.num_classes() != graph_.num_classes)
    throw Error("inference engine: taxonomy size does not match classifier head");
}

InferenceEngine InferenceEngine::from_checkpoint(const Checkpoint& ckpt, bool fold_if_needed) {
  ClassTaxonomy tax = ckpt.taxonomy_json.empty() ? ClassTaxonomy::aiweeds16()
                                                 : ClassTaxonomy::from_json(ckpt.taxonomy_json);
  if (ckpt.graph.has_batchnorm()) {
    if (!fold_if_needed)
      throw Error("inference engine: checkpoint contains batchnorm layers");
    auto [g, p] = fold_batchnorm(ckpt.graph, ckpt.params);
    return InferenceEngine(std::move(g), std::move(p), std::move(tax));
  }
  return InferenceEngine(ckpt.graph, ckpt.params, std::move(tax));
}

ClassPrediction InferenceEngine::infer(const ImageTensor& frame) const {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& spec = graph_.input;
  const ImageTensor* use = &frame;
  ImageTensor resized;
  if (frame.height != spec[1] || frame.width != spec[2]) {
    resized = resize(frame, spec[2], spec[1]);
    use = &resized;
  }
  nn::Tensor<float> input = image_to_input(*use);
  nn::RunOptions opt;
  opt.mode = nn::RunMode::infer;
  opt.check_finite = check_finite_;
  nn::Tensor<float> probs = nn::forward(plan_, params_, input, opt);

  ClassPrediction pred;
  pred.probabilities.resize(static_cast<std::size_t>(graph_.num_classes));
  for (int c = 0; c < graph_.num_classes; ++c)
    pred.probabilities[c] = std::clamp(probs[c], 1e-7f, 1.f - 1e-7f);
  int best = 0;
  for (int c = 1; c < graph_.num_classes; ++c)
    if (pred.probabilities[c] > pred.probabilities[best]) best = c;
  pred.class_id = best;
  pred.class_name = taxonomy_.name_of(best);
  pred.probability = pred.probabilities[best];
  pred.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return pred;
}

}  // namespace weedpilot::deploy

#ifndef WEEDPILOT_DEPLOY_FOLD_HPP
#define WEEDPILOT_DEPLOY_FOLD_HPP

#include <utility>

#include "weedpilot/nn/graph.hpp"

namespace weedpilot::deploy {

// The inference-optimization pass: absorbs every BatchNorm into the linear
// layer directly before it,
//   w' = w * gamma / sqrt(var + eps),   b' = (b - mean) * gamma / sqrt(var + eps) + beta,
// and returns a flat graph with the BN layers removed (inverted residuals are
// lowered to explicit conv/depthwise/skip layers in the process). Throws an
// unfoldable error naming the BN whose predecessor is not linear.
std::pair<nn::ModelGraph, nn::ParameterSet<float>> fold_batchnorm(
    const nn::ModelGraph& graph, const nn::ParameterSet<float>& params);

}  // namespace weedpilot::deploy

#endif

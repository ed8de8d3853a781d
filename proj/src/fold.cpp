#include "weedpilot/deploy/fold.hpp"

#include <cmath>

namespace weedpilot::deploy {

using nn::LayerKind;
using nn::LayerSpec;
using nn::ModelGraph;
using nn::ParameterSet;
using nn::Shape;
using nn::Step;
using nn::Tensor;

std::pair<ModelGraph, ParameterSet<float>> fold_batchnorm(const ModelGraph& graph,
                                                          const ParameterSet<float>& params) {
  const nn::Plan plan = nn::compile(graph);
  nn::validate_params(plan, params);

  ModelGraph folded;
  folded.input = graph.input;
  folded.num_classes = graph.num_classes;
  ParameterSet<float> fparams;

  const auto& steps = plan.steps;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const Step& st = steps[i];
    switch (st.op) {
      case LayerKind::batchnorm: {
        const std::string name = st.pname.empty() ? "bn" : st.pname;
        throw Error("unfoldable: batchnorm \"" + name +
                    "\" is not directly preceded by a conv/depthwise/dense layer");
      }
      case LayerKind::conv:
      case LayerKind::depthwise:
      case LayerKind::dense: {
        const bool next_is_bn = i + 1 < steps.size() && steps[i + 1].op == LayerKind::batchnorm;
        const bool had_bias = st.op == LayerKind::dense || st.bias;  // dense always carries one
        Tensor<float> w = params.at(st.pname + ".w");
        const int oc = st.op == LayerKind::depthwise ? st.in_c : st.out_c;
        Tensor<float> b = had_bias ? params.at(st.pname + ".b") : Tensor<float>(Shape::of(oc));

        if (next_is_bn) {
          const Step& bn = steps[i + 1];
          const auto& gamma = params.at(bn.pname + ".gamma");
          const auto& beta = params.at(bn.pname + ".beta");
          const auto& mean = params.at(bn.pname + ".mean");
          const auto& var = params.at(bn.pname + ".var");
          for (int c = 0; c < oc; ++c) {
            const double s = gamma[c] / std::sqrt(static_cast<double>(var[c]) + bn.eps);
            if (st.op == LayerKind::conv) {
              const long long per = w.size() / oc;
              for (long long j = 0; j < per; ++j)
                w[static_cast<std::size_t>(c) * per + j] =
                    static_cast<float>(w[static_cast<std::size_t>(c) * per + j] * s);
            } else if (st.op == LayerKind::depthwise) {
              const long long per = w.size() / oc;
              for (long long j = 0; j < per; ++j)
                w[static_cast<std::size_t>(c) * per + j] =
                    static_cast<float>(w[static_cast<std::size_t>(c) * per + j] * s);
            } else {  // dense: weights are (F, U), column c scales
              const int F = w.shape().d[0], U = w.shape().d[1];
              for (int f = 0; f < F; ++f)
                w[static_cast<std::size_t>(f) * U + c] =
                    static_cast<float>(w[static_cast<std::size_t>(f) * U + c] * s);
            }
            b[c] = static_cast<float>((b[c] - mean[c]) * s + beta[c]);
          }
        }

        LayerSpec l;
        l.kind = st.op;
        l.name = st.pname;
        l.kernel = st.kernel;
        l.stride = st.stride;
        l.bias = next_is_bn || had_bias;
        l.out_channels = st.out_c;
        folded.layers.push_back(l);
        fparams.add(st.pname + ".w", std::move(w));
        if (l.bias) fparams.add(st.pname + ".b", std::move(b));
        if (next_is_bn) ++i;  // BN consumed
        break;
      }
      case LayerKind::relu6:
      case LayerKind::gap:
      case LayerKind::sigmoid:
      case LayerKind::residual_save:
      case LayerKind::residual_add: {
        LayerSpec l;
        l.kind = st.op;
        folded.layers.push_back(l);
        break;
      }
      default:
        throw Error("fold_batchnorm: unexpected step kind");
    }
  }

  nn::validate_params(nn::compile(folded), fparams);
  return {std::move(folded), std::move(fparams)};
}

}  // namespace weedpilot::deploy

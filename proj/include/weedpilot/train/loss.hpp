#ifndef WEEDPILOT_TRAIN_LOSS_HPP
#define WEEDPILOT_TRAIN_LOSS_HPP

#include <cmath>

#include "weedpilot/nn/tensor.hpp"

namespace weedpilot::train {

template <typename S>
struct LossResult {
  double loss = 0.0;
  nn::Tensor<S> dprobs;       // d(mean BCE)/d(probabilities)
  long long clamped = 0;      // elements that hit the [1e-7, 1-1e-7] clamp
};

// Mean element-wise binary cross-entropy over N x K sigmoid outputs against
// one-hot targets. Probabilities at exactly 0 or 1 are clamped (and counted,
// so callers can log it).
template <typename S>
LossResult<S> bce_loss(const nn::Tensor<S>& probs, const nn::Tensor<S>& targets) {
  if (probs.shape() != targets.shape()) throw Error("bce_loss: shape mismatch");
  const long long n = probs.size();
  if (n == 0) throw Error("bce_loss: empty input");

  constexpr double kEps = 1e-7;
  LossResult<S> out;
  out.dprobs = nn::Tensor<S>(probs.shape());
  double acc = 0.0;
  for (long long i = 0; i < n; ++i) {
    double p = static_cast<double>(probs[i]);
    if (p < kEps || p > 1.0 - kEps) {
      p = std::min(std::max(p, kEps), 1.0 - kEps);
      ++out.clamped;
    }
    const double t = static_cast<double>(targets[i]);
    acc += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
    out.dprobs[i] = static_cast<S>((p - t) / (p * (1.0 - p)) / static_cast<double>(n));
  }
  out.loss = acc / static_cast<double>(n);
  return out;
}

}  // namespace weedpilot::train

#endif

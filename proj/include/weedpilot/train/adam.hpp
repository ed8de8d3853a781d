#ifndef WEEDPILOT_TRAIN_ADAM_HPP
#define WEEDPILOT_TRAIN_ADAM_HPP

#include <cmath>

#include "weedpilot/nn/graph.hpp"

namespace weedpilot::train {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment per parameter tensor plus the shared step counter.
template <typename S>
struct AdamState {
  nn::ParameterSet<S> m, v;
  long long t = 0;

  static AdamState zeros_like(const nn::ParameterSet<S>& params) {
    return {params.zeros_like(), params.zeros_like(), 0};
  }
};

// Bias-corrected Adam update, in place:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,  t <- t+1
//   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
// BN running statistics receive zero gradients and stay untouched.
template <typename S>
void adam_step(nn::ParameterSet<S>& params, const nn::ParameterSet<S>& grads,
               AdamState<S>& state, double lr, const AdamConfig& cfg = {},
               bool check_finite = false) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw Error("adam_step: parameter/gradient/state mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& [name, theta] = params.entries()[k];
    const auto& g = grads.entries()[k].second;
    if (g.shape() != theta.shape())
      throw Error("adam_step: gradient shape mismatch for " + name);
    auto& m = state.m.entries()[k].second;
    auto& v = state.v.entries()[k].second;
    const long long n = theta.size();
    for (long long i = 0; i < n; ++i) {
      const double gi = static_cast<double>(g[i]);
      if (check_finite && !std::isfinite(gi))
        throw Error("adam_step: non-finite gradient in " + name + " at element " +
                    std::to_string(i));
      const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<S>(mi);
      v[i] = static_cast<S>(vi);
      theta[i] = static_cast<S>(theta[i] - lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps));
    }
  }
}

}  // namespace weedpilot::train

#endif

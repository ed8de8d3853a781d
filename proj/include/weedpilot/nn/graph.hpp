#ifndef WEEDPILOT_NN_GRAPH_HPP
#define WEEDPILOT_NN_GRAPH_HPP

#include <nlohmann/json.hpp>

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "weedpilot/nn/layers.hpp"

namespace weedpilot::nn {

enum class LayerKind {
  conv,
  depthwise,
  batchnorm,
  relu6,
  inverted_residual,
  gap,
  dense,
  sigmoid,
  residual_save,  // only in lowered/folded graphs
  residual_add,
};

const char* layer_kind_name(LayerKind k);
LayerKind layer_kind_from(const std::string& s);

struct LayerSpec {
  LayerKind kind = LayerKind::conv;
  std::string name;
  int out_channels = 0;  // conv / inverted_residual; dense units for dense
  int kernel = 3;
  int stride = 1;
  bool bias = false;
  int expansion = 1;  // inverted_residual
  double eps = 1e-5;
  double momentum = 0.9;
};

// Layer topology separated from its numeric parameters. The head is always
// GAP -> Dense(num_classes) -> Sigmoid.
struct ModelGraph {
  std::array<int, 3> input{3, 224, 384};  // C,H,W
  int num_classes = 16;
  std::vector<LayerSpec> layers;

  nlohmann::json to_json() const;
  static ModelGraph from_json(const nlohmann::json& j);
  bool has_batchnorm() const;  // includes BN inside inverted residuals
};

// ---------------------------------------------------------------------------
// Named parameter tensors, creation-ordered (serialization depends on it).
// ---------------------------------------------------------------------------
template <typename S>
class ParameterSet {
 public:
  void add(std::string name, Tensor<S> t) {
    if (index_.count(name)) throw Error("duplicate parameter name " + name);
    index_[name] = entries_.size();
    entries_.emplace_back(std::move(name), std::move(t));
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Tensor<S>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("unknown parameter " + name);
    return entries_[it->second].second;
  }
  const Tensor<S>& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("unknown parameter " + name);
    return entries_[it->second].second;
  }

  std::vector<std::pair<std::string, Tensor<S>>>& entries() { return entries_; }
  const std::vector<std::pair<std::string, Tensor<S>>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  long long total_params() const {
    long long n = 0;
    for (const auto& [_, t] : entries_) n += t.size();
    return n;
  }

  ParameterSet zeros_like() const {
    ParameterSet z;
    for (const auto& [name, t] : entries_) z.add(name, Tensor<S>(t.shape()));
    return z;
  }

  template <typename T>
  ParameterSet<T> cast() const {
    ParameterSet<T> out;
    for (const auto& [name, t] : entries_) out.add(name, t.template cast<T>());
    return out;
  }

 private:
  std::vector<std::pair<std::string, Tensor<S>>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Execution plan: the graph lowered to primitive steps with resolved shapes.
// ---------------------------------------------------------------------------
struct Step {
  LayerKind op = LayerKind::conv;
  std::string pname;
  int kernel = 3, stride = 1;
  bool bias = false;
  double eps = 1e-5, momentum = 0.9;
  int in_c = 0, in_h = 0, in_w = 0;
  int out_c = 0, out_h = 0, out_w = 0;
  int match = -1;  // residual_add: index of its residual_save step
};

struct Plan {
  std::array<int, 3> input{3, 224, 384};
  int num_classes = 16;
  std::vector<Step> steps;
};

Plan compile(const ModelGraph& graph);

// Per-layer forward FLOP estimate at batch size N, (name, flops) pairs.
std::vector<std::pair<std::string, long long>> flop_estimate(const Plan& plan, int batch);
long long total_flops(const Plan& plan, int batch);

enum class RunMode { train, infer };

struct RunOptions {
  RunMode mode = RunMode::infer;
  bool check_finite = false;  // reject NaN/Inf at layer boundaries
};

template <typename S>
struct Activations {
  std::vector<Tensor<S>> acts;        // acts[i] = input of step i; back() = output
  std::vector<BnCache<S>> bn_caches;  // per step, filled for batchnorm steps
};

// ---------------------------------------------------------------------------
// Parameter creation / validation
// ---------------------------------------------------------------------------
template <typename S>
ParameterSet<S> init_params(const Plan& plan, std::uint64_t seed) {
  ParameterSet<S> params;
  std::uint64_t tensor_idx = 0;
  auto next_rng = [&] { return Rng(derive_seed(seed, 0x1217, tensor_idx++)); };
  for (const auto& st : plan.steps) {
    switch (st.op) {
      case LayerKind::conv: {
        Tensor<S> w(Shape::of(st.out_c, st.in_c, st.kernel, st.kernel));
        Rng rng = next_rng();
        he_normal_init(w, static_cast<long long>(st.in_c) * st.kernel * st.kernel, rng);
        params.add(st.pname + ".w", std::move(w));
        if (st.bias) params.add(st.pname + ".b", Tensor<S>(Shape::of(st.out_c)));
        break;
      }
      case LayerKind::depthwise: {
        Tensor<S> w(Shape::of(st.in_c, st.kernel, st.kernel));
        Rng rng = next_rng();
        he_normal_init(w, static_cast<long long>(st.kernel) * st.kernel, rng);
        params.add(st.pname + ".w", std::move(w));
        if (st.bias) params.add(st.pname + ".b", Tensor<S>(Shape::of(st.in_c)));
        break;
      }
      case LayerKind::batchnorm:
        params.add(st.pname + ".gamma", Tensor<S>::full(Shape::of(st.in_c), S(1)));
        params.add(st.pname + ".beta", Tensor<S>(Shape::of(st.in_c)));
        params.add(st.pname + ".mean", Tensor<S>(Shape::of(st.in_c)));
        params.add(st.pname + ".var", Tensor<S>::full(Shape::of(st.in_c), S(1)));
        break;
      case LayerKind::dense: {
        const long long fan_in = static_cast<long long>(st.in_c);
        Tensor<S> w(Shape::of(st.in_c, st.out_c));
        Rng rng = next_rng();
        glorot_uniform_init(w, fan_in, st.out_c, rng);
        params.add(st.pname + ".w", std::move(w));
        // Bias starts at the one-hot prior: sigmoid(b) = 1/units.
        const S prior = st.out_c > 1 ? static_cast<S>(-std::log(st.out_c - 1.0)) : S(0);
        params.add(st.pname + ".b", Tensor<S>::full(Shape::of(st.out_c), prior));
        break;
      }
      default:
        break;
    }
  }
  return params;
}

template <typename S>
void validate_params(const Plan& plan, const ParameterSet<S>& params) {
  auto expect = [&](const std::string& name, Shape s) {
    if (!params.has(name)) throw Error("missing parameter tensor " + name);
    if (params.at(name).shape() != s)
      throw Error("parameter " + name + " has shape " + params.at(name).shape().str() +
                  ", graph expects " + s.str());
  };
  for (const auto& st : plan.steps) {
    switch (st.op) {
      case LayerKind::conv:
        expect(st.pname + ".w", Shape::of(st.out_c, st.in_c, st.kernel, st.kernel));
        if (st.bias) expect(st.pname + ".b", Shape::of(st.out_c));
        break;
      case LayerKind::depthwise:
        expect(st.pname + ".w", Shape::of(st.in_c, st.kernel, st.kernel));
        if (st.bias) expect(st.pname + ".b", Shape::of(st.in_c));
        break;
      case LayerKind::batchnorm:
        expect(st.pname + ".gamma", Shape::of(st.in_c));
        expect(st.pname + ".beta", Shape::of(st.in_c));
        expect(st.pname + ".mean", Shape::of(st.in_c));
        expect(st.pname + ".var", Shape::of(st.in_c));
        break;
      case LayerKind::dense:
        expect(st.pname + ".w", Shape::of(st.in_c, st.out_c));
        expect(st.pname + ".b", Shape::of(st.out_c));
        break;
      default:
        break;
    }
  }
}

// ---------------------------------------------------------------------------
// Forward / backward over a plan
// ---------------------------------------------------------------------------
template <typename S>
Tensor<S> forward(const Plan& plan, const ParameterSet<S>& params, const Tensor<S>& batch,
                  const RunOptions& opt, Activations<S>* cache = nullptr) {
  const Shape& bs = batch.shape();
  if (bs.rank != 4 || bs.d[1] != plan.input[0] || bs.d[2] != plan.input[1] ||
      bs.d[3] != plan.input[2])
    throw Error("forward: batch shape " + bs.str() + " does not match graph input (N," +
                std::to_string(plan.input[0]) + "," + std::to_string(plan.input[1]) + "," +
                std::to_string(plan.input[2]) + ")");
  if (opt.check_finite && !batch.finite()) throw Error("forward: non-finite input batch");

  const bool train = opt.mode == RunMode::train;
  if (cache) {
    cache->acts.clear();
    cache->bn_caches.assign(plan.steps.size(), {});
    cache->acts.reserve(plan.steps.size() + 1);
    cache->acts.push_back(batch);
  }

  Tensor<S> cur = batch;
  std::vector<Tensor<S>> saved;  // residual stack for cache-less runs
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    const Step& st = plan.steps[i];
    const Tensor<S>& in = cache ? cache->acts[i] : cur;
    Tensor<S> out;
    switch (st.op) {
      case LayerKind::conv: {
        const Tensor<S>* b = st.bias ? &params.at(st.pname + ".b") : nullptr;
        out = conv2d_forward(in, params.at(st.pname + ".w"), b, st.stride);
        break;
      }
      case LayerKind::depthwise: {
        const Tensor<S>* b = st.bias ? &params.at(st.pname + ".b") : nullptr;
        out = depthwise_forward(in, params.at(st.pname + ".w"), b, st.stride);
        break;
      }
      case LayerKind::batchnorm: {
        BnCache<S> bc;
        // Running-statistic updates in train mode are the one mutation here;
        // infer mode only reads.
        auto& rw = const_cast<ParameterSet<S>&>(params);
        out = batchnorm_forward(in, params.at(st.pname + ".gamma"), params.at(st.pname + ".beta"),
                                rw.at(st.pname + ".mean"), rw.at(st.pname + ".var"),
                                st.eps, st.momentum, train, &bc);
        if (cache) cache->bn_caches[i] = std::move(bc);
        break;
      }
      case LayerKind::relu6:
        out = relu6_forward(in);
        break;
      case LayerKind::gap:
        out = gap_forward(in);
        break;
      case LayerKind::dense:
        out = dense_forward(in, params.at(st.pname + ".w"), params.at(st.pname + ".b"));
        break;
      case LayerKind::sigmoid:
        out = sigmoid_forward(in);
        break;
      case LayerKind::residual_save:
        out = in;
        if (!cache) saved.push_back(in);
        break;
      case LayerKind::residual_add: {
        const Tensor<S>& res = cache ? cache->acts[st.match + 1] : saved.back();
        if (res.shape() != in.shape())
          throw Error("residual add: shape mismatch at " + st.pname);
        out = in;
        out.array() += res.array();
        if (!cache) saved.pop_back();
        break;
      }
      default:
        throw Error("forward: inverted_residual must be lowered before execution");
    }
    if (opt.check_finite && !out.finite())
      throw Error("forward: non-finite activation after " +
                  (st.pname.empty() ? std::string(layer_kind_name(st.op)) : st.pname));
    if (cache)
      cache->acts.push_back(std::move(out));
    else
      cur = std::move(out);
  }
  return cache ? cache->acts.back() : cur;
}

// Gradient of the loss w.r.t. every parameter, given d(loss)/d(probabilities).
// Requires the Activations recorded by a train-mode forward on the same batch.
template <typename S>
ParameterSet<S> backward(const Plan& plan, const ParameterSet<S>& params,
                         const Activations<S>& cache, const Tensor<S>& dprobs) {
  if (cache.acts.size() != plan.steps.size() + 1)
    throw Error("backward: activations do not match plan (run forward in train mode first)");
  ParameterSet<S> grads;
  // Grad tensors must mirror ParameterSet order; collect then emit in order.
  std::unordered_map<std::string, Tensor<S>> acc;

  std::unordered_map<int, Tensor<S>> res_grads;
  Tensor<S> g = dprobs;
  for (int i = static_cast<int>(plan.steps.size()) - 1; i >= 0; --i) {
    const Step& st = plan.steps[i];
    const Tensor<S>& in = cache.acts[i];
    const Tensor<S>& out = cache.acts[i + 1];
    switch (st.op) {
      case LayerKind::conv: {
        auto lg = conv2d_backward(in, params.at(st.pname + ".w"), g, st.stride, st.bias);
        acc.emplace(st.pname + ".w", std::move(lg.dw));
        if (st.bias) acc.emplace(st.pname + ".b", std::move(lg.db));
        g = std::move(lg.dx);
        break;
      }
      case LayerKind::depthwise: {
        auto lg = depthwise_backward(in, params.at(st.pname + ".w"), g, st.stride, st.bias);
        acc.emplace(st.pname + ".w", std::move(lg.dw));
        if (st.bias) acc.emplace(st.pname + ".b", std::move(lg.db));
        g = std::move(lg.dx);
        break;
      }
      case LayerKind::batchnorm: {
        auto bg = batchnorm_backward(in, params.at(st.pname + ".gamma"), cache.bn_caches[i], g);
        acc.emplace(st.pname + ".gamma", std::move(bg.dgamma));
        acc.emplace(st.pname + ".beta", std::move(bg.dbeta));
        g = std::move(bg.dx);
        break;
      }
      case LayerKind::relu6:
        g = relu6_backward(in, g);
        break;
      case LayerKind::gap:
        g = gap_backward(in.shape(), g);
        break;
      case LayerKind::dense: {
        auto lg = dense_backward(in, params.at(st.pname + ".w"), g);
        acc.emplace(st.pname + ".w", std::move(lg.dw));
        acc.emplace(st.pname + ".b", std::move(lg.db));
        g = std::move(lg.dx);
        break;
      }
      case LayerKind::sigmoid:
        g = sigmoid_backward(out, g);
        break;
      case LayerKind::residual_add: {
        auto it = res_grads.find(st.match);
        if (it == res_grads.end())
          res_grads.emplace(st.match, g);
        else
          it->second.array() += g.array();
        break;  // d(in) = g unchanged
      }
      case LayerKind::residual_save: {
        auto it = res_grads.find(i);
        if (it != res_grads.end()) {
          g.array() += it->second.array();
          res_grads.erase(it);
        }
        break;
      }
      default:
        throw Error("backward: unexpected layer kind");
    }
  }

  for (const auto& [name, t] : params.entries()) {
    auto it = acc.find(name);
    if (it != acc.end())
      grads.add(name, std::move(it->second));
    else
      grads.add(name, Tensor<S>(t.shape()));  // BN running stats etc. carry zero grads
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Builder: micro MobileNetV2-style classifier
// ---------------------------------------------------------------------------
ModelGraph build_micro_mobilenet_graph(double width_mult, int num_classes = 16,
                                       std::array<int, 3> input = {3, 224, 384});

template <typename S>
std::pair<ModelGraph, ParameterSet<S>> build_micro_mobilenet(double width_mult,
                                                             int num_classes = 16,
                                                             std::array<int, 3> input = {3, 224,
                                                                                         384},
                                                             std::uint64_t seed = 0x5eedbed) {
  ModelGraph g = build_micro_mobilenet_graph(width_mult, num_classes, input);
  return {g, init_params<S>(compile(g), seed)};
}

}  // namespace weedpilot::nn

#endif

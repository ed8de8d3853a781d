#include "weedpilot/nn/graph.hpp"

#include <cmath>

namespace weedpilot::nn {

using json = nlohmann::json;

const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::depthwise: return "depthwise";
    case LayerKind::batchnorm: return "bn";
    case LayerKind::relu6: return "relu6";
    case LayerKind::inverted_residual: return "ir";
    case LayerKind::gap: return "gap";
    case LayerKind::dense: return "dense";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::residual_save: return "res_save";
    case LayerKind::residual_add: return "res_add";
  }
  return "?";
}

LayerKind layer_kind_from(const std::string& s) {
  for (LayerKind k : {LayerKind::conv, LayerKind::depthwise, LayerKind::batchnorm,
                      LayerKind::relu6, LayerKind::inverted_residual, LayerKind::gap,
                      LayerKind::dense, LayerKind::sigmoid, LayerKind::residual_save,
                      LayerKind::residual_add})
    if (s == layer_kind_name(k)) return k;
  throw Error("unknown layer kind \"" + s + "\"");
}

json ModelGraph::to_json() const {
  json layers_j = json::array();
  for (const auto& l : layers) {
    json e{{"kind", layer_kind_name(l.kind)}};
    if (!l.name.empty()) e["name"] = l.name;
    switch (l.kind) {
      case LayerKind::conv:
        e["out"] = l.out_channels;
        e["k"] = l.kernel;
        e["stride"] = l.stride;
        e["bias"] = l.bias;
        break;
      case LayerKind::depthwise:
        e["k"] = l.kernel;
        e["stride"] = l.stride;
        e["bias"] = l.bias;
        break;
      case LayerKind::batchnorm:
        e["eps"] = l.eps;
        e["momentum"] = l.momentum;
        break;
      case LayerKind::inverted_residual:
        e["t"] = l.expansion;
        e["out"] = l.out_channels;
        e["stride"] = l.stride;
        e["eps"] = l.eps;
        e["momentum"] = l.momentum;
        break;
      case LayerKind::dense:
        e["units"] = l.out_channels;
        break;
      default:
        break;
    }
    layers_j.push_back(std::move(e));
  }
  return json{{"input", {input[0], input[1], input[2]}},
              {"num_classes", num_classes},
              {"layers", layers_j}};
}

ModelGraph ModelGraph::from_json(const json& j) {
  ModelGraph g;
  auto in = j.at("input");
  g.input = {in.at(0).get<int>(), in.at(1).get<int>(), in.at(2).get<int>()};
  g.num_classes = j.at("num_classes").get<int>();
  for (const auto& e : j.at("layers")) {
    LayerSpec l;
    l.kind = layer_kind_from(e.at("kind").get<std::string>());
    l.name = e.value("name", "");
    switch (l.kind) {
      case LayerKind::conv:
        l.out_channels = e.at("out").get<int>();
        l.kernel = e.at("k").get<int>();
        l.stride = e.at("stride").get<int>();
        l.bias = e.at("bias").get<bool>();
        break;
      case LayerKind::depthwise:
        l.kernel = e.at("k").get<int>();
        l.stride = e.at("stride").get<int>();
        l.bias = e.at("bias").get<bool>();
        break;
      case LayerKind::batchnorm:
        l.eps = e.value("eps", 1e-5);
        l.momentum = e.value("momentum", 0.9);
        break;
      case LayerKind::inverted_residual:
        l.expansion = e.at("t").get<int>();
        l.out_channels = e.at("out").get<int>();
        l.stride = e.at("stride").get<int>();
        l.eps = e.value("eps", 1e-5);
        l.momentum = e.value("momentum", 0.9);
        break;
      case LayerKind::dense:
        l.out_channels = e.at("units").get<int>();
        break;
      default:
        break;
    }
    g.layers.push_back(std::move(l));
  }
  return g;
}

bool ModelGraph::has_batchnorm() const {
  for (const auto& l : layers)
    if (l.kind == LayerKind::batchnorm || l.kind == LayerKind::inverted_residual) return true;
  return false;
}

namespace {

Step make_step(LayerKind op, std::string pname, int in_c, int in_h, int in_w) {
  Step s;
  s.op = op;
  s.pname = std::move(pname);
  s.in_c = in_c;
  s.in_h = in_h;
  s.in_w = in_w;
  s.out_c = in_c;
  s.out_h = in_h;
  s.out_w = in_w;
  return s;
}

}  // namespace

Plan compile(const ModelGraph& graph) {
  Plan plan;
  plan.input = graph.input;
  plan.num_classes = graph.num_classes;
  int c = graph.input[0], h = graph.input[1], w = graph.input[2];
  bool pooled = false;

  auto push_conv = [&](const std::string& name, int out, int k, int stride, bool bias) {
    ConvGeom g = conv_geometry(c, h, w, out, k, stride);
    Step s = make_step(LayerKind::conv, name, c, h, w);
    s.kernel = k;
    s.stride = stride;
    s.bias = bias;
    s.out_c = out;
    s.out_h = g.out_h;
    s.out_w = g.out_w;
    plan.steps.push_back(s);
    c = out;
    h = g.out_h;
    w = g.out_w;
  };
  auto push_dw = [&](const std::string& name, int k, int stride, bool bias) {
    ConvGeom g = conv_geometry(c, h, w, c, k, stride);
    Step s = make_step(LayerKind::depthwise, name, c, h, w);
    s.kernel = k;
    s.stride = stride;
    s.bias = bias;
    s.out_h = g.out_h;
    s.out_w = g.out_w;
    plan.steps.push_back(s);
    h = g.out_h;
    w = g.out_w;
  };
  auto push_bn = [&](const std::string& name, double eps, double momentum) {
    Step s = make_step(LayerKind::batchnorm, name, c, h, w);
    s.eps = eps;
    s.momentum = momentum;
    plan.steps.push_back(s);
  };
  auto push_plain = [&](LayerKind op) { plan.steps.push_back(make_step(op, "", c, h, w)); };

  for (const auto& l : graph.layers) {
    if (pooled && l.kind != LayerKind::dense && l.kind != LayerKind::sigmoid)
      throw Error("graph: only dense/sigmoid may follow global average pooling");
    switch (l.kind) {
      case LayerKind::conv:
        push_conv(l.name, l.out_channels, l.kernel, l.stride, l.bias);
        break;
      case LayerKind::depthwise:
        push_dw(l.name, l.kernel, l.stride, l.bias);
        break;
      case LayerKind::batchnorm:
        push_bn(l.name, l.eps, l.momentum);
        break;
      case LayerKind::relu6:
      case LayerKind::residual_save:
        push_plain(l.kind);
        break;
      case LayerKind::residual_add: {
        // Flat graphs carry explicit markers; match LIFO.
        int match = -1;
        int depth = 0;
        for (int i = static_cast<int>(plan.steps.size()) - 1; i >= 0; --i) {
          if (plan.steps[i].op == LayerKind::residual_add) ++depth;
          if (plan.steps[i].op == LayerKind::residual_save) {
            if (depth == 0) {
              match = i;
              break;
            }
            --depth;
          }
        }
        if (match < 0) throw Error("graph: residual_add without residual_save");
        Step s = make_step(LayerKind::residual_add, l.name, c, h, w);
        s.match = match;
        plan.steps.push_back(s);
        break;
      }
      case LayerKind::inverted_residual: {
        const int in_c = c;
        const bool residual = l.stride == 1 && in_c == l.out_channels;
        int save_idx = -1;
        if (residual) {
          plan.steps.push_back(make_step(LayerKind::residual_save, "", c, h, w));
          save_idx = static_cast<int>(plan.steps.size()) - 1;
        }
        const int expanded = in_c * l.expansion;
        if (l.expansion != 1) {
          push_conv(l.name + ".expand", expanded, 1, 1, false);
          push_bn(l.name + ".expand.bn", l.eps, l.momentum);
          push_plain(LayerKind::relu6);
        }
        push_dw(l.name + ".dw", 3, l.stride, false);
        push_bn(l.name + ".dw.bn", l.eps, l.momentum);
        push_plain(LayerKind::relu6);
        push_conv(l.name + ".proj", l.out_channels, 1, 1, false);
        push_bn(l.name + ".proj.bn", l.eps, l.momentum);
        if (residual) {
          Step s = make_step(LayerKind::residual_add, "", c, h, w);
          s.match = save_idx;
          plan.steps.push_back(s);
        }
        break;
      }
      case LayerKind::gap: {
        Step s = make_step(LayerKind::gap, "", c, h, w);
        s.out_h = 1;
        s.out_w = 1;
        plan.steps.push_back(s);
        pooled = true;
        h = 1;
        w = 1;
        break;
      }
      case LayerKind::dense: {
        if (!pooled) throw Error("graph: dense expects pooled (N,F) features");
        Step s = make_step(LayerKind::dense, l.name.empty() ? "fc" : l.name, c, 1, 1);
        s.out_c = l.out_channels;
        plan.steps.push_back(s);
        c = l.out_channels;
        break;
      }
      case LayerKind::sigmoid:
        push_plain(LayerKind::sigmoid);
        break;
    }
  }

  // The classifier head is fixed: ... -> GAP -> Dense -> Sigmoid.
  const std::size_t n = plan.steps.size();
  if (n < 3 || plan.steps[n - 1].op != LayerKind::sigmoid ||
      plan.steps[n - 2].op != LayerKind::dense || plan.steps[n - 3].op != LayerKind::gap)
    throw Error("graph: final layers must be gap -> dense -> sigmoid");
  if (plan.steps[n - 2].out_c != graph.num_classes)
    throw Error("graph: dense head width disagrees with num_classes");
  return plan;
}

std::vector<std::pair<std::string, long long>> flop_estimate(const Plan& plan, int batch) {
  std::vector<std::pair<std::string, long long>> out;
  for (const auto& st : plan.steps) {
    long long f = 0;
    const long long out_hw = static_cast<long long>(st.out_h) * st.out_w;
    const long long in_hw = static_cast<long long>(st.in_h) * st.in_w;
    switch (st.op) {
      case LayerKind::conv:
        f = 2LL * batch * st.out_c * out_hw * st.in_c * st.kernel * st.kernel;
        break;
      case LayerKind::depthwise:
        f = 2LL * batch * st.in_c * out_hw * st.kernel * st.kernel;
        break;
      case LayerKind::batchnorm:
        f = 2LL * batch * st.in_c * in_hw;
        break;
      case LayerKind::relu6:
      case LayerKind::residual_add:
        f = static_cast<long long>(batch) * st.in_c * in_hw;
        break;
      case LayerKind::gap:
        f = static_cast<long long>(batch) * st.in_c * in_hw;
        break;
      case LayerKind::dense:
        f = 2LL * batch * st.in_c * st.out_c;
        break;
      case LayerKind::sigmoid:
        f = 4LL * batch * st.in_c;
        break;
      default:
        break;
    }
    out.emplace_back(st.pname.empty() ? layer_kind_name(st.op) : st.pname, f);
  }
  return out;
}

long long total_flops(const Plan& plan, int batch) {
  long long t = 0;
  for (const auto& [_, f] : flop_estimate(plan, batch)) t += f;
  return t;
}

ModelGraph build_micro_mobilenet_graph(double width_mult, int num_classes,
                                       std::array<int, 3> input) {
  if (!(width_mult > 0.0) || width_mult > 2.0)
    throw Error("build_micro_mobilenet: width_mult must be in (0, 2]");
  if (input[0] != 3) throw Error("build_micro_mobilenet: expected 3-channel input");
  if (input[1] < 16 || input[2] < 16)
    throw Error("build_micro_mobilenet: input spatial dims must be at least 16");
  if (num_classes < 2) throw Error("build_micro_mobilenet: need at least 2 classes");

  auto scaled = [&](int base) {
    return std::max(4, static_cast<int>(std::lround(base * width_mult)));
  };

  ModelGraph g;
  g.input = input;
  g.num_classes = num_classes;

  auto conv_bn = [&](const std::string& name, int out, int k, int stride) {
    LayerSpec conv{LayerKind::conv, name, out, k, stride, false};
    g.layers.push_back(conv);
    LayerSpec bn{LayerKind::batchnorm, name + ".bn"};
    g.layers.push_back(bn);
    g.layers.push_back(LayerSpec{LayerKind::relu6});
  };

  conv_bn("stem", scaled(32), 3, 2);

  // (expansion, base channels, repeats, first stride); the second block of a
  // repeated group runs stride 1 at equal width, which exercises the skip.
  struct Row {
    int t, ch, n, s;
  };
  const Row rows[] = {{1, 16, 1, 1}, {6, 24, 2, 2}, {6, 32, 2, 2},
                      {6, 64, 1, 2}, {6, 96, 1, 1}, {6, 160, 1, 2}};
  int block = 0;
  for (const Row& r : rows)
    for (int i = 0; i < r.n; ++i) {
      LayerSpec ir{LayerKind::inverted_residual, "block" + std::to_string(++block)};
      ir.expansion = r.t;
      ir.out_channels = scaled(r.ch);
      ir.stride = i == 0 ? r.s : 1;
      g.layers.push_back(ir);
    }

  conv_bn("head", std::max(32, scaled(128)), 1, 1);
  g.layers.push_back(LayerSpec{LayerKind::gap});
  LayerSpec fc{LayerKind::dense, "fc", num_classes};
  g.layers.push_back(fc);
  g.layers.push_back(LayerSpec{LayerKind::sigmoid});

  compile(g);  // validates shape compatibility end to end
  return g;
}

}  // namespace weedpilot::nn

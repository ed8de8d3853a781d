#include "weedpilot/eval/bench.hpp"

namespace weedpilot::eval {

using json = nlohmann::json;

json BenchmarkReport::to_json() const {
  json layers = json::array();
  for (const auto& [name, f] : per_layer_flops) layers.push_back({{"layer", name}, {"flops", f}});
  return json{{"latency_ms",
               {{"mean", latency.mean_ms},
                {"p50", latency.p50_ms},
                {"p95", latency.p95_ms},
                {"max", latency.max_ms},
                {"frames", latency.frames}}},
              {"warmup", warmup},
              {"parameter_count", parameter_count},
              {"parameter_bytes", parameter_bytes},
              {"peak_working_set_bytes", peak_working_set_bytes},
              {"flops_per_frame", flops_per_frame},
              {"flop_batch", flop_batch},
              {"per_layer_flops", layers}};
}

long long peak_working_set_bytes(const nn::Plan& plan) {
  long long widest = 0;
  long long params = 0;
  for (const auto& st : plan.steps) {
    long long in_b = 4LL * st.in_c * st.in_h * st.in_w;
    long long out_b = 4LL * st.out_c * st.out_h * st.out_w;
    widest = std::max(widest, in_b + out_b);
    switch (st.op) {
      case nn::LayerKind::conv:
        params += static_cast<long long>(st.out_c) * st.in_c * st.kernel * st.kernel +
                  (st.bias ? st.out_c : 0);
        break;
      case nn::LayerKind::depthwise:
        params += static_cast<long long>(st.in_c) * st.kernel * st.kernel + (st.bias ? st.in_c : 0);
        break;
      case nn::LayerKind::batchnorm:
        params += 4LL * st.in_c;
        break;
      case nn::LayerKind::dense:
        params += static_cast<long long>(st.in_c) * st.out_c + st.out_c;
        break;
      default:
        break;
    }
  }
  return 4 * params + widest;
}

BenchmarkReport benchmark_inference(const deploy::InferenceEngine& engine,
                                    const FrameProvider& frames, int timed_frames, int warmup_n,
                                    int flop_batch) {
  if (warmup_n < 1) throw Error("benchmark: warmup_n must be >= 1");
  if (timed_frames < 10) throw Error("benchmark: refusing percentiles for fewer than 10 frames");

  for (int i = 0; i < warmup_n; ++i) engine.infer(frames(i));

  std::vector<double> lat;
  lat.reserve(static_cast<std::size_t>(timed_frames));
  for (int i = 0; i < timed_frames; ++i) {
    auto pred = engine.infer(frames(warmup_n + i));
    lat.push_back(pred.latency_ms);
  }

  BenchmarkReport r;
  r.latency = latency_stats(std::move(lat));
  r.warmup = warmup_n;
  r.parameter_count = engine.parameter_count();
  r.parameter_bytes = 4 * r.parameter_count;
  r.flop_batch = flop_batch;

  const nn::Plan plan = nn::compile(engine.graph());
  r.per_layer_flops = nn::flop_estimate(plan, flop_batch);
  r.flops_per_frame = nn::total_flops(plan, 1);

  long long widest = 0;
  for (const auto& st : plan.steps) {
    long long in_b = 4LL * st.in_c * st.in_h * st.in_w;
    long long out_b = 4LL * st.out_c * st.out_h * st.out_w;
    widest = std::max(widest, in_b + out_b);
  }
  r.peak_working_set_bytes = r.parameter_bytes + widest;
  return r;
}

}  // namespace weedpilot::eval

#ifndef WEEDPILOT_EVAL_BENCH_HPP
#define WEEDPILOT_EVAL_BENCH_HPP

#include <functional>

#include "weedpilot/deploy/engine.hpp"
#include "weedpilot/eval/metrics.hpp"

namespace weedpilot::eval {

struct BenchmarkReport {
  LatencyStats latency;
  int warmup = 0;
  long long parameter_count = 0;
  long long parameter_bytes = 0;             // 4 bytes per f32 parameter, exact
  long long peak_working_set_bytes = 0;      // params + widest activation pair
  long long flops_per_frame = 0;
  std::vector<std::pair<std::string, long long>> per_layer_flops;
  int flop_batch = 1;

  nlohmann::json to_json() const;
};

using FrameProvider = std::function<ImageTensor(long long index)>;

// Parameter memory plus the widest input+output activation pair, batch 1.
long long peak_working_set_bytes(const nn::Plan& plan);

// Wall-clock timing around engine.infer only. warmup_n iterations (>= 1)
// are discarded; refuses to report percentiles for fewer than 10 timed
// frames. Memory figures are computed exactly from tensor shapes.
BenchmarkReport benchmark_inference(const deploy::InferenceEngine& engine,
                                    const FrameProvider& frames, int timed_frames = 100,
                                    int warmup_n = 3, int flop_batch = 1);

}  // namespace weedpilot::eval

#endif

#ifndef WEEDPILOT_DEPLOY_PIPELINE_HPP
#define WEEDPILOT_DEPLOY_PIPELINE_HPP

#include <nlohmann/json.hpp>

#include <functional>
#include <optional>

#include "weedpilot/deploy/engine.hpp"
#include "weedpilot/eval/metrics.hpp"

namespace weedpilot::deploy {

struct PipelineConfig {
  double fps = 10.0;
  int queue_capacity = 1;  // frames allowed to wait for the inference stage
};

struct PipelineStats {
  long long frames_in = 0;
  long long frames_out = 0;
  long long dropped = 0;
  eval::LatencyStats latency;  // per-frame inference latency

  nlohmann::json to_json() const;
};

// nullopt ends the stream.
using FrameSource = std::function<std::optional<ImageTensor>(long long index)>;
// Called from the emit stage; t_s is seconds since pipeline start (virtual
// time in the simulated variant).
using PredictionSink = std::function<void(long long index, double t_s, const ClassPrediction&)>;
using InferFn = std::function<ClassPrediction(const ImageTensor&, long long index)>;

// Real-time three-stage pipeline (acquire -> infer -> emit) over OS threads.
// The acquire stage is never blocked: when the bounded queue is full the
// oldest waiting frame is dropped and counted.
PipelineStats run_pipeline(const FrameSource& source, const InferFn& infer,
                           const PredictionSink& sink, const PipelineConfig& cfg = {});

inline PipelineStats run_pipeline(const FrameSource& source, const InferenceEngine& engine,
                                  const PredictionSink& sink, const PipelineConfig& cfg = {}) {
  return run_pipeline(
      source, [&engine](const ImageTensor& f, long long) { return engine.infer(f); }, sink, cfg);
}

// Same queueing semantics on a virtual clock: frames arrive at i/fps and the
// inference stage takes exactly service_s seconds. Fully deterministic, used
// by the simulator and the drop-rate tests.
PipelineStats run_pipeline_virtual(const FrameSource& source, const InferFn& infer,
                                   double service_s, const PredictionSink& sink,
                                   const PipelineConfig& cfg = {});

}  // namespace weedpilot::deploy

#endif

#include "weedpilot/deploy/pipeline.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>

namespace weedpilot::deploy {

using json = nlohmann::json;

json PipelineStats::to_json() const {
  return json{{"frames_in", frames_in},
              {"frames_out", frames_out},
              {"dropped", dropped},
              {"latency_ms",
               {{"mean", latency.mean_ms},
                {"p50", latency.p50_ms},
                {"p95", latency.p95_ms},
                {"max", latency.max_ms}}}};
}

namespace {

struct Job {
  long long index = 0;
  ImageTensor frame;
};

// Bounded drop-oldest queue between acquire and infer. push() never blocks.
class FrameQueue {
 public:
  explicit FrameQueue(std::size_t capacity) : capacity_(capacity) {}

  long long push(Job job) {
    std::lock_guard<std::mutex> lock(mu_);
    long long dropped = 0;
    while (q_.size() >= capacity_) {
      q_.pop_front();
      ++dropped;
    }
    q_.push_back(std::move(job));
    cv_.notify_one();
    return dropped;
  }

  void close() {
    std::lock_guard<std::mutex> lock(mu_);
    closed_ = true;
    cv_.notify_all();
  }

  std::optional<Job> pop() {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] { return closed_ || !q_.empty(); });
    if (q_.empty()) return std::nullopt;
    Job j = std::move(q_.front());
    q_.pop_front();
    return j;
  }

 private:
  std::size_t capacity_;
  std::deque<Job> q_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool closed_ = false;
};

struct Emission {
  long long index;
  double t_s;
  ClassPrediction pred;
};

}  // namespace

PipelineStats run_pipeline(const FrameSource& source, const InferFn& infer,
                           const PredictionSink& sink, const PipelineConfig& cfg) {
  if (cfg.fps <= 0) throw Error("pipeline: fps must be > 0");
  if (cfg.queue_capacity < 1) throw Error("pipeline: queue capacity must be >= 1");

  PipelineStats stats;
  FrameQueue frames(static_cast<std::size_t>(cfg.queue_capacity));

  std::mutex emit_mu;
  std::condition_variable emit_cv;
  std::deque<Emission> emissions;
  bool infer_done = false;

  std::vector<double> latencies;
  std::mutex stats_mu;
  long long dropped = 0, frames_in = 0;

  const auto start = std::chrono::steady_clock::now();
  const auto period = std::chrono::duration<double>(1.0 / cfg.fps);

  std::thread acquire([&] {
    for (long long i = 0;; ++i) {
      auto frame = source(i);
      if (!frame) break;
      std::this_thread::sleep_until(
          start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(period * i));
      long long d = frames.push(Job{i, std::move(*frame)});
      std::lock_guard<std::mutex> lock(stats_mu);
      dropped += d;
      ++frames_in;
    }
    frames.close();
  });

  std::thread infer_stage([&] {
    for (;;) {
      auto job = frames.pop();
      if (!job) break;
      const auto t0 = std::chrono::steady_clock::now();
      ClassPrediction pred = infer(job->frame, job->index);
      const auto t1 = std::chrono::steady_clock::now();
      {
        std::lock_guard<std::mutex> lock(stats_mu);
        latencies.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      }
      std::lock_guard<std::mutex> lock(emit_mu);
      emissions.push_back(
          {job->index, std::chrono::duration<double>(t1 - start).count(), std::move(pred)});
      emit_cv.notify_one();
    }
    std::lock_guard<std::mutex> lock(emit_mu);
    infer_done = true;
    emit_cv.notify_all();
  });

  long long frames_out = 0;
  {
    std::unique_lock<std::mutex> lock(emit_mu);
    for (;;) {
      emit_cv.wait(lock, [&] { return infer_done || !emissions.empty(); });
      if (emissions.empty() && infer_done) break;
      Emission e = std::move(emissions.front());
      emissions.pop_front();
      lock.unlock();
      sink(e.index, e.t_s, e.pred);
      ++frames_out;
      lock.lock();
    }
  }

  acquire.join();
  infer_stage.join();

  stats.frames_in = frames_in;
  stats.frames_out = frames_out;
  stats.dropped = dropped;
  if (!latencies.empty()) stats.latency = eval::latency_stats(std::move(latencies));
  return stats;
}

PipelineStats run_pipeline_virtual(const FrameSource& source, const InferFn& infer,
                                   double service_s, const PredictionSink& sink,
                                   const PipelineConfig& cfg) {
  if (cfg.fps <= 0) throw Error("pipeline: fps must be > 0");
  if (cfg.queue_capacity < 1) throw Error("pipeline: queue capacity must be >= 1");
  if (service_s < 0) throw Error("pipeline: service time must be >= 0");

  PipelineStats stats;
  struct Waiting {
    long long index;
    ImageTensor frame;
    double arrival;
  };
  std::deque<Waiting> waiting;
  double server_free = 0.0;
  std::vector<double> latencies;

  auto serve_front = [&](double now_limit, bool drain) {
    while (!waiting.empty()) {
      double start_t = std::max(server_free, waiting.front().arrival);
      if (!drain && start_t > now_limit) break;
      Waiting w = std::move(waiting.front());
      waiting.pop_front();
      server_free = start_t + service_s;
      ClassPrediction pred = infer(w.frame, w.index);
      pred.latency_ms = service_s * 1000.0;
      latencies.push_back(pred.latency_ms);
      sink(w.index, server_free, pred);
      ++stats.frames_out;
    }
  };

  for (long long i = 0;; ++i) {
    auto frame = source(i);
    if (!frame) break;
    const double t = static_cast<double>(i) / cfg.fps;
    ++stats.frames_in;
    serve_front(t, false);
    if (static_cast<int>(waiting.size()) >= cfg.queue_capacity) {
      waiting.pop_front();  // oldest frame loses
      ++stats.dropped;
    }
    waiting.push_back({i, std::move(*frame), t});
  }
  serve_front(0.0, true);

  if (!latencies.empty()) stats.latency = eval::latency_stats(std::move(latencies));
  return stats;
}

}  // namespace weedpilot::deploy

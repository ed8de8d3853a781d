#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "weedpilot/deploy/engine.hpp"
#include "weedpilot/deploy/fold.hpp"
#include "weedpilot/deploy/pipeline.hpp"
#include "weedpilot/eval/bench.hpp"
#include "weedpilot/rng.hpp"
#include "weedpilot/synth.hpp"

using namespace weedpilot;
using nn::LayerKind;
using nn::LayerSpec;
using nn::Shape;
using nn::Tensor;
namespace fs = std::filesystem;

namespace {

fs::path tmp_file(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "weedpilot_tests";
  fs::create_directories(dir);
  return dir / name;
}

deploy::Checkpoint micro_checkpoint(std::array<int, 3> input = {3, 56, 96},
                                    std::uint64_t seed = 5) {
  deploy::Checkpoint ckpt;
  ckpt.graph = nn::build_micro_mobilenet_graph(0.25, 16, input);
  ckpt.params = nn::init_params<float>(nn::compile(ckpt.graph), seed);
  ckpt.meta = {12, 0.0625};
  ckpt.taxonomy_json = ClassTaxonomy::aiweeds16().to_json();
  return ckpt;
}

// Folding is only interesting when the BN statistics are non-trivial.
void randomize_bn(nn::ParameterSet<float>& params, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& [name, t] : params.entries()) {
    if (name.ends_with(".gamma"))
      for (long long i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform(0.5, 1.5));
    if (name.ends_with(".beta"))
      for (long long i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform(-0.4, 0.4));
    if (name.ends_with(".mean"))
      for (long long i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform(-0.3, 0.3));
    if (name.ends_with(".var"))
      for (long long i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform(0.4, 2.0));
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("checkpoint round trip") {
  deploy::Checkpoint ckpt = micro_checkpoint();
  fs::path p = tmp_file("roundtrip.wpck");
  deploy::save_checkpoint(p.string(), ckpt);
  deploy::Checkpoint back = deploy::load_checkpoint(p.string());

  REQUIRE(back.params.size() == ckpt.params.size());
  for (std::size_t k = 0; k < ckpt.params.size(); ++k) {
    CHECK(back.params.entries()[k].first == ckpt.params.entries()[k].first);
    CHECK(back.params.entries()[k].second.vec() == ckpt.params.entries()[k].second.vec());
  }
  CHECK(back.meta.epoch == 12);
  CHECK(back.meta.val_loss == 0.0625);
  CHECK(back.graph.to_json() == ckpt.graph.to_json());

  // save(load(x)) must be byte-identical to the original file
  fs::path p2 = tmp_file("roundtrip2.wpck");
  deploy::save_checkpoint(p2.string(), back);
  CHECK(slurp(p) == slurp(p2));
}

TEST_CASE("checkpoint error handling") {
  deploy::Checkpoint ckpt = micro_checkpoint();
  fs::path good = tmp_file("good.wpck");
  deploy::save_checkpoint(good.string(), ckpt);
  std::string bytes = slurp(good);

  SUBCASE("corrupt magic is a format error, not a crash") {
    std::string bad = bytes;
    bad[1] = 'X';
    fs::path p = tmp_file("badmagic.wpck");
    std::ofstream(p, std::ios::binary) << bad;
    CHECK_THROWS_WITH_AS(deploy::load_checkpoint(p.string()), doctest::Contains("magic"), Error);
  }

  SUBCASE("unsupported version is rejected") {
    std::string bad = bytes;
    bad[4] = 9;
    fs::path p = tmp_file("badver.wpck");
    std::ofstream(p, std::ios::binary) << bad;
    CHECK_THROWS_WITH_AS(deploy::load_checkpoint(p.string()), doctest::Contains("version"),
                         Error);
  }

  SUBCASE("truncated file reports the offset") {
    std::string bad = bytes.substr(0, bytes.size() / 2);
    fs::path p = tmp_file("trunc.wpck");
    std::ofstream(p, std::ios::binary) << bad;
    CHECK_THROWS_WITH_AS(deploy::load_checkpoint(p.string()), doctest::Contains("offset"), Error);
  }

  SUBCASE("tensor shape disagreeing with the graph names the tensor") {
    deploy::Checkpoint broken = ckpt;
    nn::ParameterSet<float> rebuilt;
    for (const auto& [name, t] : broken.params.entries())
      rebuilt.add(name, name == "stem.w" ? Tensor<float>(Shape::of(2, 3, 3, 3)) : t);
    broken.params = std::move(rebuilt);
    fs::path p = tmp_file("shape.wpck");
    deploy::save_checkpoint(p.string(), broken);
    CHECK_THROWS_WITH_AS(deploy::load_checkpoint(p.string()), doctest::Contains("stem.w"), Error);
  }
}

TEST_CASE("batchnorm folding") {
  SUBCASE("identity statistics keep the weights bitwise") {
    nn::ModelGraph g;
    g.input = {3, 16, 16};
    g.num_classes = 4;
    LayerSpec conv{LayerKind::conv, "c", 5, 3, 1, false};
    g.layers.push_back(conv);
    LayerSpec bn{LayerKind::batchnorm, "c.bn"};
    bn.eps = 0.0;  // gamma=1, beta=0, mean=0, var=1: exact scale of 1
    g.layers.push_back(bn);
    g.layers.push_back(LayerSpec{LayerKind::gap});
    g.layers.push_back(LayerSpec{LayerKind::dense, "fc", 4});
    g.layers.push_back(LayerSpec{LayerKind::sigmoid});
    auto params = nn::init_params<float>(nn::compile(g), 7);

    auto [fg, fp] = deploy::fold_batchnorm(g, params);
    CHECK(fp.at("c.w").vec() == params.at("c.w").vec());
    for (long long i = 0; i < fp.at("c.b").size(); ++i) CHECK(fp.at("c.b")[i] == 0.f);
    CHECK_FALSE(fg.has_batchnorm());
  }

  SUBCASE("gamma=2, var=3, eps=1 collapses to scale 1: w'=w, b'=b-mean+beta") {
    nn::ModelGraph g;
    g.input = {2, 8, 8};
    g.num_classes = 2;
    LayerSpec conv{LayerKind::conv, "c", 3, 3, 1, true};
    g.layers.push_back(conv);
    LayerSpec bn{LayerKind::batchnorm, "c.bn"};
    bn.eps = 1.0;
    g.layers.push_back(bn);
    g.layers.push_back(LayerSpec{LayerKind::gap});
    g.layers.push_back(LayerSpec{LayerKind::dense, "fc", 2});
    g.layers.push_back(LayerSpec{LayerKind::sigmoid});
    auto params = nn::init_params<float>(nn::compile(g), 9);
    params.at("c.bn.gamma") = Tensor<float>::full(Shape::of(3), 2.f);
    params.at("c.bn.var") = Tensor<float>::full(Shape::of(3), 3.f);
    Rng rng(10);
    for (int i = 0; i < 3; ++i) {
      params.at("c.bn.mean")[i] = static_cast<float>(rng.uniform(-1, 1));
      params.at("c.bn.beta")[i] = static_cast<float>(rng.uniform(-1, 1));
      params.at("c.b")[i] = static_cast<float>(rng.uniform(-1, 1));
    }

    auto [fg, fp] = deploy::fold_batchnorm(g, params);
    CHECK(fp.at("c.w").vec() == params.at("c.w").vec());  // scale = 2/sqrt(4) = 1
    for (int i = 0; i < 3; ++i)
      CHECK(fp.at("c.b")[i] == doctest::Approx(params.at("c.b")[i] - params.at("c.bn.mean")[i] +
                                               params.at("c.bn.beta")[i])
                                   .epsilon(1e-6));
  }

  SUBCASE("folded micro model matches the unfolded one in infer mode") {
    deploy::Checkpoint ckpt = micro_checkpoint({3, 48, 64}, 21);
    randomize_bn(ckpt.params, 22);
    auto [fg, fp] = deploy::fold_batchnorm(ckpt.graph, ckpt.params);
    CHECK_FALSE(fg.has_batchnorm());
    CHECK(fp.total_params() < ckpt.params.total_params());

    nn::Plan unfolded = nn::compile(ckpt.graph);
    nn::Plan folded = nn::compile(fg);
    Rng rng(23);
    double worst = 0;
    for (int trial = 0; trial < 200; ++trial) {
      Tensor<float> x(Shape::of(1, 3, 48, 64));
      for (long long i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.uniform(0, 1));
      Tensor<float> a = nn::forward(unfolded, ckpt.params, x, {});
      Tensor<float> b = nn::forward(folded, fp, x, {});
      for (long long i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::fabs(static_cast<double>(a[i]) - b[i]));
    }
    CHECK(worst < 1e-5);
  }

  SUBCASE("bn without a directly preceding linear layer is unfoldable") {
    nn::ModelGraph g;
    g.input = {3, 16, 16};
    g.num_classes = 2;
    LayerSpec conv{LayerKind::conv, "c", 4, 3, 1, false};
    g.layers.push_back(conv);
    g.layers.push_back(LayerSpec{LayerKind::relu6});
    LayerSpec bn{LayerKind::batchnorm, "late.bn"};
    g.layers.push_back(bn);
    g.layers.push_back(LayerSpec{LayerKind::gap});
    g.layers.push_back(LayerSpec{LayerKind::dense, "fc", 2});
    g.layers.push_back(LayerSpec{LayerKind::sigmoid});
    auto params = nn::init_params<float>(nn::compile(g), 3);
    CHECK_THROWS_WITH_AS(deploy::fold_batchnorm(g, params), doctest::Contains("late.bn"), Error);
  }
}

TEST_CASE("inference engine") {
  deploy::Checkpoint ckpt = micro_checkpoint({3, 48, 64}, 31);
  randomize_bn(ckpt.params, 32);

  SUBCASE("engines reject graphs that still contain batchnorm") {
    CHECK_THROWS_AS(deploy::InferenceEngine(ckpt.graph, ckpt.params,
                                            ClassTaxonomy::aiweeds16()),
                    Error);
  }

  deploy::InferenceEngine engine = deploy::InferenceEngine::from_checkpoint(ckpt);
  CHECK(engine.parameter_count() < ckpt.params.total_params());

  const auto& tax = ClassTaxonomy::aiweeds16();
  ImageTensor frame = render_synthetic(tax, 3, GenSource{99, 48, 64});

  SUBCASE("the same frame yields identical probability vectors") {
    auto a = engine.infer(frame);
    auto b = engine.infer(frame);
    CHECK(a.probabilities == b.probabilities);
    CHECK(a.class_id == b.class_id);
    CHECK(a.class_id ==
          static_cast<int>(std::max_element(a.probabilities.begin(), a.probabilities.end()) -
                           a.probabilities.begin()));
    for (float p : a.probabilities) {
      CHECK(p > 0.f);
      CHECK(p < 1.f);
    }
  }

  SUBCASE("frames at other resolutions are resized internally") {
    ImageTensor big = render_synthetic(tax, 3, GenSource{99, 224, 384});
    auto pred = engine.infer(big);
    CHECK(pred.probabilities.size() == 16);
  }

  SUBCASE("zeroed head gives 0.5 everywhere and ties break to class 0") {
    deploy::Checkpoint zeroed = ckpt;
    zeroed.params.at("fc.w").array() *= 0.f;
    zeroed.params.at("fc.b").array() *= 0.f;
    deploy::InferenceEngine ze = deploy::InferenceEngine::from_checkpoint(zeroed);
    auto pred = ze.infer(frame);
    for (float p : pred.probabilities) CHECK(p == doctest::Approx(0.5));
    CHECK(pred.class_id == 0);
    CHECK(pred.class_name == "AS.");
  }
}

TEST_CASE("benchmark harness") {
  deploy::Checkpoint ckpt = micro_checkpoint({3, 48, 64}, 41);
  deploy::InferenceEngine engine = deploy::InferenceEngine::from_checkpoint(ckpt);
  const auto& tax = ClassTaxonomy::aiweeds16();
  auto frames = [&](long long i) {
    return render_synthetic(tax, static_cast<int>(i % 16), GenSource{static_cast<std::uint64_t>(i), 48, 64});
  };

  SUBCASE("parameter memory is exactly 4 bytes per parameter") {
    auto rep = eval::benchmark_inference(engine, frames, 10, 1);
    CHECK(rep.parameter_bytes == 4 * engine.parameter_count());
    CHECK(rep.latency.frames == 10);
    CHECK(rep.latency.p50_ms <= rep.latency.p95_ms);
  }

  SUBCASE("fewer than 10 timed frames or no warmup is refused") {
    CHECK_THROWS_AS(eval::benchmark_inference(engine, frames, 9, 1), Error);
    CHECK_THROWS_AS(eval::benchmark_inference(engine, frames, 10, 0), Error);
  }
}

TEST_CASE("virtual pipeline queueing") {
  ImageTensor dummy(8, 8);
  deploy::FrameSource source100 = [&](long long i) -> std::optional<ImageTensor> {
    if (i >= 100) return std::nullopt;
    return dummy;
  };
  deploy::InferFn classify = [](const ImageTensor&, long long) {
    return deploy::ClassPrediction{};
  };

  SUBCASE("40 ms service at 10 fps drops nothing") {
    auto stats = deploy::run_pipeline_virtual(source100, classify, 0.040,
                                              [](long long, double, const auto&) {}, {});
    CHECK(stats.frames_in == 100);
    CHECK(stats.dropped == 0);
    CHECK(stats.frames_out == 100);
  }

  SUBCASE("250 ms service at 10 fps settles at a 60% drop rate") {
    auto stats = deploy::run_pipeline_virtual(source100, classify, 0.250,
                                              [](long long, double, const auto&) {}, {});
    CHECK(stats.frames_in == 100);
    CHECK(stats.frames_out + stats.dropped == 100);
    double rate = static_cast<double>(stats.dropped) / stats.frames_in;
    CHECK(rate == doctest::Approx(0.60).epsilon(0.034));  // 60% +/- 2 points
  }

  SUBCASE("virtual runs are deterministic") {
    std::vector<long long> emitted_a, emitted_b;
    auto run = [&](std::vector<long long>& sinked) {
      return deploy::run_pipeline_virtual(
          source100, classify, 0.130,
          [&](long long i, double, const auto&) { sinked.push_back(i); }, {});
    };
    auto a = run(emitted_a);
    auto b = run(emitted_b);
    CHECK(a.frames_out == b.frames_out);
    CHECK(a.dropped == b.dropped);
    CHECK(emitted_a == emitted_b);
  }
}

TEST_CASE("real-time pipeline smoke run") {
  ImageTensor dummy(8, 8);
  deploy::FrameSource source = [&](long long i) -> std::optional<ImageTensor> {
    if (i >= 40) return std::nullopt;
    return dummy;
  };
  deploy::InferFn fast = [](const ImageTensor&, long long) {
    return deploy::ClassPrediction{};
  };
  deploy::PipelineConfig cfg;
  cfg.fps = 50.0;  // 20 ms budget, instant service
  long long emitted = 0;
  auto stats = deploy::run_pipeline(
      source, fast, [&](long long, double, const auto&) { ++emitted; }, cfg);
  CHECK(stats.frames_in == 40);
  CHECK(stats.frames_out == emitted);
  CHECK(stats.dropped == 0);
}

// weedpilot CLI: gen-data | ingest | split | augment-preview | train | eval |
// export | optimize | bench | simulate. Every subcommand writes its resolved
// configuration and machine-readable outputs into the run directory.

#include <CLI11.hpp>
#include <Eigen/Core>
#include <nlohmann/json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "weedpilot/augment.hpp"
#include "weedpilot/core.hpp"
#include "weedpilot/deploy/checkpoint.hpp"
#include "weedpilot/deploy/engine.hpp"
#include "weedpilot/deploy/fold.hpp"
#include "weedpilot/deploy/pipeline.hpp"
#include "weedpilot/eval/bench.hpp"
#include "weedpilot/eval/metrics.hpp"
#include "weedpilot/fieldsim/simulate.hpp"
#include "weedpilot/manifest.hpp"
#include "weedpilot/png_io.hpp"
#include "weedpilot/split.hpp"
#include "weedpilot/synth.hpp"
#include "weedpilot/train/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace weedpilot;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

void write_run_log(const fs::path& out_dir, const std::string& cmd, const json& resolved) {
  write_text(out_dir / ("run-" + cmd + ".json"), resolved.dump(2) + "\n");
}

fs::path prep_out_dir(const std::string& out) {
  fs::path p(out);
  fs::create_directories(p);
  return p;
}

ClassTaxonomy load_taxonomy(const std::string& taxonomy_file, const std::string& near_file = "") {
  std::string path = taxonomy_file;
  if (path.empty() && !near_file.empty()) {
    fs::path sibling = fs::path(near_file).parent_path() / "taxonomy.json";
    if (fs::exists(sibling)) path = sibling.string();
  }
  if (path.empty()) return ClassTaxonomy::aiweeds16();
  std::ifstream f(path);
  if (!f) throw Error("cannot read taxonomy " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return ClassTaxonomy::from_json(text);
}

std::array<int, 2> parse_size(const std::string& s) {  // "HxW"
  auto x = s.find('x');
  if (x == std::string::npos) throw Error("size must look like 112x192 (HxW)");
  return {std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
}

// Deterministic synthetic camera frames for benchmarking.
eval::FrameProvider bench_frames(const ClassTaxonomy& tax, std::uint64_t seed) {
  return [&tax, seed](long long i) {
    const int cls = static_cast<int>(i % tax.num_classes());
    GenSource src{derive_seed(seed, 0xBE7C, static_cast<std::uint64_t>(i)), 224, 384};
    return render_synthetic(tax, cls, src);
  };
}

struct EvalPredictions {
  std::vector<int> labels, preds;
};

EvalPredictions predict_role(const deploy::Checkpoint& ckpt, const Manifest& manifest,
                             Role role) {
  const nn::Plan plan = nn::compile(ckpt.graph);
  nn::RunOptions opt;  // infer mode
  const int K = ckpt.graph.num_classes;
  EvalPredictions out;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < manifest.samples().size(); ++i)
    if (manifest.samples()[i].role == role) idx.push_back(i);
  if (idx.empty()) throw Error("eval: no samples with the requested role");

  const int B = 32;
  for (std::size_t lo = 0; lo < idx.size(); lo += B) {
    const std::size_t hi = std::min(idx.size(), lo + B);
    nn::Tensor<float> batch(
        nn::Shape::of(static_cast<int>(hi - lo), plan.input[0], plan.input[1], plan.input[2]));
    for (std::size_t b = 0; b < hi - lo; ++b) {
      ImageTensor img =
          train::load_base_image(manifest, idx[lo + b], plan.input[1], plan.input[2]);
      const float inv = 1.f / 255.f;
      for (int c = 0; c < plan.input[0]; ++c)
        for (int y = 0; y < plan.input[1]; ++y)
          for (int x = 0; x < plan.input[2]; ++x)
            batch.at4(static_cast<int>(b), c, y, x) = img.at(y, x, c) * inv;
    }
    nn::Tensor<float> probs = nn::forward(plan, ckpt.params, batch, opt);
    for (std::size_t b = 0; b < hi - lo; ++b) {
      int best = 0;
      for (int c = 1; c < K; ++c)
        if (probs[b * K + c] > probs[b * K + best]) best = c;
      out.preds.push_back(best);
      out.labels.push_back(manifest.samples()[idx[lo + b]].class_id);
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  if (deterministic()) {
    Eigen::setNbThreads(1);
#ifdef _OPENMP
    omp_set_num_threads(1);
#endif
  }

  CLI::App app{"weedpilot: multi-class weed classification and spraying pipeline"};
  app.require_subcommand(1);

  // Shared option storage.
  std::string out_dir = "run";
  std::string data_dir, manifest_file, split_file, ckpt_file, scenario_file, taxonomy_file;
  std::uint64_t seed = 1;
  double width_mult = 0.25, lr = 1e-4, threshold = 0.5, fps = 10.0;
  int batch = 32;

  // ---- gen-data ----
  auto* gen = app.add_subcommand("gen-data", "generate the synthetic 16-class corpus");
  int gen_count = 100;
  bool gen_table1 = false, gen_write_images = false;
  std::string gen_size = "112x192";
  gen->add_option("--out-dir", out_dir);
  gen->add_option("--seed", seed);
  gen->add_option("--count", gen_count, "samples per class");
  gen->add_flag("--table1", gen_table1, "use the field-collection per-class counts");
  gen->add_option("--size", gen_size, "sample size HxW");
  gen->add_flag("--write-images", gen_write_images, "also render PNGs under <out>/images/");
  gen->callback([&] {
    auto out = prep_out_dir(out_dir);
    const auto& tax = ClassTaxonomy::aiweeds16();
    auto hw = parse_size(gen_size);
    CorpusSpec spec = gen_table1 ? CorpusSpec::field_counts(tax, hw[0], hw[1])
                                 : CorpusSpec::uniform(tax, gen_count, hw[0], hw[1]);
    Manifest m = generate_synthetic_corpus(spec, seed, tax);
    m.save_jsonl((out / "manifest.jsonl").string());
    write_text(out / "taxonomy.json", tax.to_json() + "\n");
    if (gen_write_images) {
      for (const auto& cls : tax.classes())
        fs::create_directories(out / "images" / class_folder_name(cls.short_name));
      std::map<int, int> counter;
      for (const auto& s : m.samples()) {
        char name[32];
        std::snprintf(name, sizeof name, "%05d.png", counter[s.class_id]++);
        fs::path p = out / "images" / class_folder_name(tax.name_of(s.class_id)) / name;
        write_png(p.string(), render_synthetic(tax, s.class_id, *s.gen));
      }
    }
    write_run_log(out, "gen-data",
                  json{{"seed", seed},
                       {"count", gen_table1 ? json("table1") : json(gen_count)},
                       {"size", gen_size},
                       {"samples", m.samples().size()},
                       {"write_images", gen_write_images}});
  });

  // ---- ingest ----
  auto* ingest = app.add_subcommand("ingest", "build a manifest from a directory of images");
  ingest->add_option("--data-dir", data_dir)->required();
  ingest->add_option("--out-dir", out_dir);
  ingest->callback([&] {
    auto out = prep_out_dir(out_dir);
    const auto& tax = ClassTaxonomy::aiweeds16();
    SkipReport skips;
    Manifest m = build_manifest(data_dir, tax, &skips);
    m.save_jsonl((out / "manifest.jsonl").string());
    write_text(out / "taxonomy.json", tax.to_json() + "\n");
    write_text(out / "skips.json", json(skips.skipped).dump(2) + "\n");
    write_run_log(out, "ingest",
                  json{{"data_dir", data_dir},
                       {"samples", m.samples().size()},
                       {"skipped", skips.skipped.size()}});
  });

  // ---- split ----
  auto* split_cmd = app.add_subcommand("split", "stratified 60-20-20 split with k folds");
  int k = 5;
  split_cmd->add_option("--manifest", manifest_file);
  split_cmd->add_option("--out-dir", out_dir);
  split_cmd->add_option("--seed", seed);
  split_cmd->add_option("--k", k);
  split_cmd->add_option("--taxonomy", taxonomy_file);
  split_cmd->callback([&] {
    auto out = prep_out_dir(out_dir);
    std::string mf = manifest_file.empty() ? (out / "manifest.jsonl").string() : manifest_file;
    ClassTaxonomy tax = load_taxonomy(taxonomy_file, mf);
    Manifest m = Manifest::load_jsonl(mf, tax);
    SplitAssignment sa = stratified_split(m, seed, k);
    sa.apply(m);
    m.save_jsonl((out / "split.jsonl").string());
    write_run_log(out, "split",
                  json{{"manifest", mf}, {"seed", seed}, {"k", k},
                       {"samples", m.samples().size()}});
  });

  // ---- augment-preview ----
  auto* prev = app.add_subcommand("augment-preview", "write augmented PNG previews");
  std::string prev_input, prev_class = "VM.";
  int prev_count = 8;
  prev->add_option("--input", prev_input, "source PNG (otherwise a synthetic sample)");
  prev->add_option("--class", prev_class, "synthetic class short name");
  prev->add_option("--out-dir", out_dir);
  prev->add_option("--seed", seed);
  prev->add_option("--count", prev_count);
  prev->callback([&] {
    auto out = prep_out_dir(out_dir);
    const auto& tax = ClassTaxonomy::aiweeds16();
    ImageTensor base;
    if (!prev_input.empty()) {
      base = read_png(prev_input);
    } else {
      int cls = tax.id_of(prev_class);
      if (cls < 0) throw Error("unknown class \"" + prev_class + "\"");
      base = render_synthetic(tax, cls, GenSource{derive_seed(seed, 0xBA5E), 224, 384});
    }
    write_png((out / "preview_base.png").string(), base);
    const auto policy = AugmentationPolicy::paper_defaults();
    for (int i = 0; i < prev_count; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "preview_%02d.png", i);
      write_png((out / name).string(),
                augment(base, policy, derive_seed(seed, 0xA9, static_cast<std::uint64_t>(i))));
    }
    write_run_log(out, "augment-preview",
                  json{{"seed", seed}, {"count", prev_count},
                       {"input", prev_input.empty() ? prev_class : prev_input}});
  });

  // ---- train ----
  auto* tr = app.add_subcommand("train", "train the micro classifier");
  int epochs = 64, max_restarts = 1;
  std::string input_size = "112x192";
  bool no_augment = false;
  tr->add_option("--split", split_file, "split.jsonl with roles assigned");
  tr->add_option("--manifest", manifest_file, "alias for --split");
  tr->add_option("--out-dir", out_dir);
  tr->add_option("--seed", seed);
  tr->add_option("--width-mult", width_mult);
  tr->add_option("--lr", lr);
  tr->add_option("--batch", batch);
  tr->add_option("--epochs", epochs);
  tr->add_option("--max-restarts", max_restarts);
  tr->add_option("--input-size", input_size, "model input HxW");
  tr->add_flag("--no-augment", no_augment);
  tr->add_option("--taxonomy", taxonomy_file);
  tr->callback([&] {
    auto out = prep_out_dir(out_dir);
    std::string sf = !split_file.empty() ? split_file
                     : !manifest_file.empty() ? manifest_file
                                              : (out / "split.jsonl").string();
    ClassTaxonomy tax = load_taxonomy(taxonomy_file, sf);
    Manifest m = Manifest::load_jsonl(sf, tax);
    SplitAssignment sa;
    sa.roles.reserve(m.samples().size());
    for (const auto& s : m.samples()) {
      sa.roles.push_back(s.role);
      sa.folds.push_back(s.fold);
    }
    auto hw = parse_size(input_size);
    nn::ModelGraph graph =
        nn::build_micro_mobilenet_graph(width_mult, tax.num_classes(), {3, hw[0], hw[1]});
    nn::ParameterSet<float> params =
        nn::init_params<float>(nn::compile(graph), derive_seed(seed, 0x171));

    train::TrainConfig cfg;
    cfg.batch_size = batch;
    cfg.lr_init = lr;
    cfg.max_epochs = epochs;
    cfg.max_restarts = max_restarts;
    cfg.seed = seed;
    cfg.augment_train = !no_augment;
    cfg.checkpoint_path = (out / "ckpt.wpck").string();

    auto t0 = std::chrono::steady_clock::now();
    train::TrainResult res = train::train(m, sa, graph, std::move(params), cfg);
    double wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    deploy::save_checkpoint(cfg.checkpoint_path, res.best);
    res.log.save_csv((out / "train_log.csv").string());
    write_run_log(out, "train",
                  json{{"split", sf},
                       {"seed", seed},
                       {"width_mult", width_mult},
                       {"lr", lr},
                       {"batch", batch},
                       {"epochs", epochs},
                       {"max_restarts", max_restarts},
                       {"input_size", input_size},
                       {"augment", !no_augment},
                       {"best_epoch", res.best.meta.epoch},
                       {"best_val_loss", res.best.meta.val_loss},
                       {"diverged", res.diverged}});
    std::fprintf(stderr, "train: best epoch %d, val loss %.6f (%.1f s)\n", res.best.meta.epoch,
                 res.best.meta.val_loss, wall_s);
  });

  // ---- eval ----
  auto* ev = app.add_subcommand("eval", "confusion matrix and per-class metrics");
  std::string role = "test";
  ev->add_option("--ckpt", ckpt_file)->required();
  ev->add_option("--split", split_file)->required();
  ev->add_option("--role", role)->check(CLI::IsMember({"train", "val", "test"}));
  ev->add_option("--out-dir", out_dir);
  ev->callback([&] {
    auto out = prep_out_dir(out_dir);
    deploy::Checkpoint ckpt = deploy::load_checkpoint(ckpt_file);
    ClassTaxonomy tax = ckpt.taxonomy_json.empty() ? ClassTaxonomy::aiweeds16()
                                                   : ClassTaxonomy::from_json(ckpt.taxonomy_json);
    Manifest m = Manifest::load_jsonl(split_file, tax);
    EvalPredictions ep = predict_role(ckpt, m, role_from_name(role));
    eval::ConfusionMatrix cm = eval::confusion_matrix(ep.preds, ep.labels, tax.num_classes());
    std::vector<std::string> names;
    for (const auto& c : tax.classes()) names.push_back(c.short_name);
    eval::EvalReport report = eval::make_report(cm, names);
    report.parameter_count = ckpt.params.total_params();
    report.parameter_bytes = 4 * report.parameter_count;
    report.peak_working_set_bytes = eval::peak_working_set_bytes(nn::compile(ckpt.graph));
    write_text(out / "eval.json", report.to_json().dump(2) + "\n");
    write_text(out / "confusion.csv", cm.to_csv());
    write_text(out / "f1_per_class.csv", report.f1_csv());
    write_run_log(out, "eval",
                  json{{"ckpt", ckpt_file},
                       {"split", split_file},
                       {"role", role},
                       {"samples", report.samples},
                       {"macro_avg_class_accuracy", report.macro_avg_class_accuracy}});
  });

  // ---- export ----
  auto* ex = app.add_subcommand("export", "re-save a checkpoint in canonical form");
  std::string out_file;
  ex->add_option("--ckpt", ckpt_file)->required();
  ex->add_option("--out", out_file);
  ex->add_option("--out-dir", out_dir);
  ex->callback([&] {
    auto out = prep_out_dir(out_dir);
    std::string dst = out_file.empty() ? (out / "ckpt_export.wpck").string() : out_file;
    deploy::Checkpoint ckpt = deploy::load_checkpoint(ckpt_file);
    deploy::save_checkpoint(dst, ckpt);
    write_run_log(out, "export", json{{"ckpt", ckpt_file}, {"out", dst}});
  });

  // ---- optimize ----
  auto* opt_cmd = app.add_subcommand("optimize", "fold batchnorm for inference");
  opt_cmd->add_option("--ckpt", ckpt_file)->required();
  opt_cmd->add_option("--out", out_file);
  opt_cmd->add_option("--out-dir", out_dir);
  opt_cmd->callback([&] {
    auto out = prep_out_dir(out_dir);
    std::string dst = out_file.empty() ? (out / "ckpt_folded.wpck").string() : out_file;
    deploy::Checkpoint ckpt = deploy::load_checkpoint(ckpt_file);
    auto [graph, params] = deploy::fold_batchnorm(ckpt.graph, ckpt.params);
    deploy::Checkpoint folded{std::move(graph), std::move(params), ckpt.meta,
                              ckpt.taxonomy_json};
    deploy::save_checkpoint(dst, folded);
    write_run_log(out, "optimize",
                  json{{"ckpt", ckpt_file},
                       {"out", dst},
                       {"params_before", ckpt.params.total_params()},
                       {"params_after", folded.params.total_params()}});
  });

  // ---- bench ----
  auto* be = app.add_subcommand("bench", "inference latency/memory benchmark");
  int bench_n = 100, warmup = 3;
  be->add_option("--ckpt", ckpt_file)->required();
  be->add_option("--out-dir", out_dir);
  be->add_option("--frames", bench_n);
  be->add_option("--warmup", warmup);
  be->add_option("--seed", seed);
  be->callback([&] {
    auto out = prep_out_dir(out_dir);
    deploy::Checkpoint ckpt = deploy::load_checkpoint(ckpt_file);
    ClassTaxonomy tax = ckpt.taxonomy_json.empty() ? ClassTaxonomy::aiweeds16()
                                                   : ClassTaxonomy::from_json(ckpt.taxonomy_json);
    auto frames = bench_frames(tax, seed);
    json result{{"reference_paper_ms", 47.78}};

    if (ckpt.graph.has_batchnorm()) {
      // Time the unfolded model too so the optimization gain is visible.
      const nn::Plan plan = nn::compile(ckpt.graph);
      nn::RunOptions ro;
      std::vector<double> lat;
      for (int i = 0; i < warmup + bench_n; ++i) {
        ImageTensor f = frames(i);
        ImageTensor r = resize(f, plan.input[2], plan.input[1]);
        nn::Tensor<float> in = deploy::image_to_input(r);
        auto t0 = std::chrono::steady_clock::now();
        nn::forward(plan, ckpt.params, in, ro);
        double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        if (i >= warmup) lat.push_back(ms);
      }
      auto ls = eval::latency_stats(std::move(lat));
      result["unfolded"] = {{"latency_ms",
                             {{"mean", ls.mean_ms},
                              {"p50", ls.p50_ms},
                              {"p95", ls.p95_ms},
                              {"max", ls.max_ms}}},
                            {"parameter_count", ckpt.params.total_params()},
                            {"flops_per_frame", nn::total_flops(plan, 1)}};
    } else {
      result["unfolded"] = nullptr;
    }

    deploy::InferenceEngine engine = deploy::InferenceEngine::from_checkpoint(ckpt);
    eval::BenchmarkReport rep = eval::benchmark_inference(engine, frames, bench_n, warmup);
    result["folded"] = rep.to_json();
    write_text(out / "bench.json", result.dump(2) + "\n");
    write_run_log(out, "bench",
                  json{{"ckpt", ckpt_file}, {"frames", bench_n}, {"warmup", warmup}});
    std::fprintf(stderr, "bench: folded mean %.2f ms (paper reference 47.78 ms)\n",
                 rep.latency.mean_ms);
  });

  // ---- simulate ----
  auto* sim = app.add_subcommand("simulate", "classify-and-spray field run");
  bool oracle = false;
  double speed = 0.0, duration = 3600.0, infer_time = 0.0;
  sim->add_option("--ckpt", ckpt_file);
  sim->add_flag("--oracle", oracle, "ground-truth passthrough classifier");
  sim->add_option("--scenario", scenario_file);
  sim->add_option("--out-dir", out_dir);
  sim->add_option("--seed", seed);
  sim->add_option("--threshold", threshold);
  sim->add_option("--fps", fps);
  sim->add_option("--speed", speed, "override scenario speed (m/s)");
  sim->add_option("--duration", duration);
  sim->add_option("--infer-time", infer_time, "virtual inference service time (s)");
  sim->callback([&] {
    auto out = prep_out_dir(out_dir);
    if (!oracle && ckpt_file.empty())
      throw Error("simulate: give --ckpt or --oracle");
    const auto& tax = ClassTaxonomy::aiweeds16();
    fieldsim::Scenario sc = scenario_file.empty()
                                ? fieldsim::medium_density_scenario(tax, seed)
                                : fieldsim::Scenario::load(scenario_file, tax);
    if (scenario_file.empty()) sc.save((out / "scenario.json").string(), tax);

    fieldsim::SimConfig cfg;
    cfg.fps = fps;
    cfg.speed_mps = speed > 0 ? speed : sc.speed_mps;
    cfg.duration_s = duration;
    cfg.infer_time_s = infer_time;
    cfg.seed = seed;
    cfg.policy = fieldsim::SprayPolicy::for_taxonomy(tax, threshold);

    std::optional<deploy::Checkpoint> ckpt;
    std::optional<deploy::InferenceEngine> engine;
    fieldsim::Classifier classify;
    if (oracle) {
      classify = fieldsim::oracle_classifier(tax);
    } else {
      ckpt = deploy::load_checkpoint(ckpt_file);
      engine.emplace(deploy::InferenceEngine::from_checkpoint(*ckpt));
      classify = fieldsim::engine_classifier(*engine);
    }

    fieldsim::RunReport report = fieldsim::simulate_run(sc.field, tax, classify, cfg);
    write_text(out / "sim_report.json", report.to_json(tax).dump(2) + "\n");
    write_text(out / "events.csv", report.events_csv(tax));
    write_run_log(out, "simulate",
                  json{{"oracle", oracle},
                       {"ckpt", ckpt_file},
                       {"scenario", scenario_file.empty() ? "medium-density" : scenario_file},
                       {"seed", seed},
                       {"threshold", threshold},
                       {"fps", fps},
                       {"speed", cfg.speed_mps},
                       {"infer_time", infer_time},
                       {"per_patch_accuracy", report.per_patch_accuracy},
                       {"herbicide_ml", report.herbicide_ml}});
    std::fprintf(stderr, "simulate: per-patch accuracy %.3f, herbicide %.1f ml (baseline %.1f)\n",
                 report.per_patch_accuracy, report.herbicide_ml, report.baseline_ml);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);  // prints help or the parse error
    return rc == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}

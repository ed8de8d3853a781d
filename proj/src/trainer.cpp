#include "weedpilot/train/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "weedpilot/eval/metrics.hpp"
#include "weedpilot/png_io.hpp"
#include "weedpilot/synth.hpp"
#include "weedpilot/train/loss.hpp"

namespace weedpilot::train {

void TrainConfig::validate() const {
  scheduler().validate();
  if (batch_size < 1) throw Error("train config: batch_size must be >= 1");
  if (max_epochs < 0 || max_restarts < 0) throw Error("train config: negative budget");
  policy.validate();
}

std::string TrainLog::to_csv() const {
  std::string out = "epoch,train_loss,val_loss,val_avg_class_acc,lr,action\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%s\n", r.epoch, r.train_loss,
                  r.val_loss, r.val_avg_class_acc, r.lr, r.action.c_str());
    out += buf;
  }
  return out;
}

void TrainLog::save_csv(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f << to_csv();
}

ImageTensor load_base_image(const Manifest& manifest, std::size_t idx, int target_h,
                            int target_w) {
  const Sample& s = manifest.samples().at(idx);
  ImageTensor img = s.is_generated()
                        ? render_synthetic(manifest.taxonomy(), s.class_id, *s.gen)
                        : read_png(s.path);
  return resize(img, target_w, target_h);
}

namespace {

struct Dataset {
  std::vector<std::size_t> train_idx, val_idx;
  std::vector<ImageTensor> images;  // keyed by manifest index
  std::vector<int> labels;
};

Dataset load_dataset(const Manifest& manifest, const SplitAssignment& split, int h, int w) {
  if (split.roles.size() != manifest.samples().size())
    throw Error("train: split does not match manifest");
  Dataset ds;
  ds.images.resize(manifest.samples().size());
  ds.labels.resize(manifest.samples().size(), -1);
  for (std::size_t i = 0; i < manifest.samples().size(); ++i) {
    switch (split.roles[i]) {
      case Role::train: ds.train_idx.push_back(i); break;
      case Role::val: ds.val_idx.push_back(i); break;
      default: continue;  // test samples are never materialized here
    }
    ds.labels[i] = manifest.samples()[i].class_id;
  }
  if (ds.train_idx.empty() || ds.val_idx.empty())
    throw Error("train: split must provide non-empty train and val roles");

  std::vector<std::size_t> wanted = ds.train_idx;
  wanted.insert(wanted.end(), ds.val_idx.begin(), ds.val_idx.end());
#pragma omp parallel for schedule(dynamic)
  for (long long k = 0; k < static_cast<long long>(wanted.size()); ++k) {
    const std::size_t i = wanted[k];
    ds.images[i] = load_base_image(manifest, i, h, w);
  }
  return ds;
}

// Fetch guard: the training path must never see a test-role sample.
void assert_not_test(const SplitAssignment& split, std::size_t idx) {
  if (split.roles[idx] == Role::test)
    throw Error("train: attempted to fetch a test-role sample (index " + std::to_string(idx) +
                ")");
}

nn::Tensor<float> batch_tensor(const Dataset& ds, const std::vector<std::size_t>& idx,
                               std::size_t lo, std::size_t hi, int C, int H, int W,
                               const SplitAssignment& split, const AugmentationPolicy* policy,
                               std::uint64_t seed, int epoch) {
  const int n = static_cast<int>(hi - lo);
  nn::Tensor<float> batch(nn::Shape::of(n, C, H, W));
  const float inv = 1.f / 255.f;
#pragma omp parallel for schedule(dynamic)
  for (int b = 0; b < n; ++b) {
    const std::size_t mi = idx[lo + b];
    assert_not_test(split, mi);
    const ImageTensor* img = &ds.images[mi];
    ImageTensor augmented;
    if (policy) {
      // One derived seed per (epoch, sample): independent of worker count.
      augmented = augment(*img, *policy,
                          derive_seed(seed, 0xA06, static_cast<std::uint64_t>(epoch), mi));
      img = &augmented;
    }
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) batch.at4(b, c, y, x) = img->at(y, x, c) * inv;
  }
  return batch;
}

nn::Tensor<float> one_hot(const Dataset& ds, const std::vector<std::size_t>& idx, std::size_t lo,
                          std::size_t hi, int num_classes) {
  const int n = static_cast<int>(hi - lo);
  nn::Tensor<float> t(nn::Shape::of(n, num_classes));
  for (int b = 0; b < n; ++b) t[static_cast<std::size_t>(b) * num_classes + ds.labels[idx[lo + b]]] = 1.f;
  return t;
}

struct ValMetrics {
  double loss = 0.0;
  double avg_class_acc = 0.0;
};

ValMetrics evaluate_val(const nn::Plan& plan, const nn::ParameterSet<float>& params,
                        const Dataset& ds, const SplitAssignment& split, const TrainConfig& cfg,
                        int num_classes) {
  nn::RunOptions opt;
  opt.mode = nn::RunMode::infer;
  opt.check_finite = cfg.check_finite;
  const int C = plan.input[0], H = plan.input[1], W = plan.input[2];

  double loss_sum = 0.0;
  long long loss_n = 0;
  eval::ConfusionMatrix cm(num_classes);
  for (std::size_t lo = 0; lo < ds.val_idx.size(); lo += cfg.batch_size) {
    const std::size_t hi = std::min(ds.val_idx.size(), lo + cfg.batch_size);
    nn::Tensor<float> batch =
        batch_tensor(ds, ds.val_idx, lo, hi, C, H, W, split, nullptr, cfg.seed, 0);
    nn::Tensor<float> probs = nn::forward(plan, params, batch, opt);
    nn::Tensor<float> targets = one_hot(ds, ds.val_idx, lo, hi, num_classes);
    auto lr = bce_loss(probs, targets);
    loss_sum += lr.loss * static_cast<double>(hi - lo);
    loss_n += static_cast<long long>(hi - lo);
    for (std::size_t b = 0; b < hi - lo; ++b) {
      int best = 0;
      for (int c = 1; c < num_classes; ++c)
        if (probs[b * num_classes + c] > probs[b * num_classes + best]) best = c;
      cm.record(ds.labels[ds.val_idx[lo + b]], best);
    }
  }
  ValMetrics m;
  m.loss = loss_sum / loss_n;
  m.avg_class_acc = eval::avg_class_accuracy(cm);
  return m;
}

}  // namespace

TrainResult train(const Manifest& manifest, const SplitAssignment& split,
                  const nn::ModelGraph& graph, nn::ParameterSet<float> params,
                  const TrainConfig& cfg) {
  cfg.validate();
  const nn::Plan plan = nn::compile(graph);
  nn::validate_params(plan, params);
  const int num_classes = graph.num_classes;
  const int C = plan.input[0], H = plan.input[1], W = plan.input[2];

  TrainResult result;
  result.best.graph = graph;
  result.best.params = params;
  result.best.taxonomy_json = manifest.taxonomy().to_json();
  result.scheduler = SchedulerState::fresh(cfg.scheduler());

  if (cfg.max_epochs == 0) return result;

  Dataset ds = load_dataset(manifest, split, H, W);
  AdamState<float> adam = AdamState<float>::zeros_like(params);
  SchedulerState& sched = result.scheduler;
  const AugmentationPolicy* policy = cfg.augment_train ? &cfg.policy : nullptr;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::vector<std::size_t> order = ds.train_idx;
    Rng shuffle_rng(derive_seed(cfg.seed, 0xE9, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    const double lr_this_epoch = sched.current_lr;
    double train_loss_sum = 0.0;
    long long train_n = 0;
    bool diverged = false;
    for (std::size_t lo = 0; lo < order.size(); lo += cfg.batch_size) {
      const std::size_t hi = std::min(order.size(), lo + cfg.batch_size);
      nn::Tensor<float> batch =
          batch_tensor(ds, order, lo, hi, C, H, W, split, policy, cfg.seed, epoch);
      nn::Tensor<float> targets = one_hot(ds, order, lo, hi, num_classes);

      nn::RunOptions opt;
      opt.mode = nn::RunMode::train;
      opt.check_finite = cfg.check_finite;
      nn::Activations<float> acts;
      nn::Tensor<float> probs = nn::forward(plan, params, batch, opt, &acts);
      auto loss = bce_loss(probs, targets);
      if (!std::isfinite(loss.loss)) {
        diverged = true;
        break;
      }
      train_loss_sum += loss.loss * static_cast<double>(hi - lo);
      train_n += static_cast<long long>(hi - lo);

      nn::ParameterSet<float> grads = nn::backward(plan, params, acts, loss.dprobs);
      adam_step(params, grads, adam, sched.current_lr, cfg.adam, cfg.check_finite);
    }

    if (diverged) {
      result.diverged = true;
      EpochLog row{epoch, std::nan(""), std::nan(""), 0.0, lr_this_epoch, "diverged"};
      result.log.rows.push_back(row);
      break;
    }

    ValMetrics vm = evaluate_val(plan, params, ds, split, cfg, num_classes);
    SchedulerAction action = scheduler_update(sched, vm.loss, cfg.scheduler());

    if (sched.improved_last) {
      result.best.params = params;
      result.best.meta.epoch = epoch;
      result.best.meta.val_loss = vm.loss;
      if (!cfg.checkpoint_path.empty()) deploy::save_checkpoint(cfg.checkpoint_path, result.best);
    }

    std::string action_name = scheduler_action_name(action);
    if (action == SchedulerAction::Abort) {
      if (sched.restarts_done < cfg.max_restarts) {
        params = result.best.params;  // reload the continuously saved best
        adam = AdamState<float>::zeros_like(params);
        scheduler_restart(sched, cfg.scheduler());
        action_name = "restart";
      }
    }

    EpochLog row{epoch,         train_loss_sum / std::max<long long>(1, train_n),
                 vm.loss,       vm.avg_class_acc,
                 lr_this_epoch, action_name};
    result.log.rows.push_back(row);
    if (action == SchedulerAction::Abort && action_name == "abort") break;
  }
  return result;
}

}  // namespace weedpilot::train

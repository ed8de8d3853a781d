#ifndef WEEDPILOT_TRAIN_TRAINER_HPP
#define WEEDPILOT_TRAIN_TRAINER_HPP

#include <string>
#include <vector>

#include "weedpilot/augment.hpp"
#include "weedpilot/deploy/checkpoint.hpp"
#include "weedpilot/manifest.hpp"
#include "weedpilot/split.hpp"
#include "weedpilot/train/adam.hpp"
#include "weedpilot/train/scheduler.hpp"

namespace weedpilot::train {

struct TrainConfig {
  int batch_size = 32;
  double lr_init = 1e-4;
  int halve_patience = 16;
  int abort_patience = 32;
  double restart_lr = 0.5e-4;
  int max_epochs = 64;
  int max_restarts = 1;
  AdamConfig adam;
  std::uint64_t seed = 1;
  bool augment_train = true;
  AugmentationPolicy policy = AugmentationPolicy::paper_defaults();
  std::string checkpoint_path;  // best model continuously saved here when set
  bool check_finite = false;

  SchedulerConfig scheduler() const {
    return SchedulerConfig{halve_patience, abort_patience, lr_init, restart_lr};
  }
  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_avg_class_acc = 0.0;
  double lr = 0.0;
  std::string action;
};

struct TrainLog {
  std::vector<EpochLog> rows;
  std::string to_csv() const;
  void save_csv(const std::string& path) const;
};

struct TrainResult {
  deploy::Checkpoint best;
  TrainLog log;
  SchedulerState scheduler;
  bool diverged = false;
};

// Decodes (or renders) a manifest sample and resizes it to the model input.
ImageTensor load_base_image(const Manifest& manifest, std::size_t idx, int target_h,
                            int target_w);

// The full training loop: seeded shuffle -> augmented batches -> Adam steps,
// epoch-end validation on un-augmented images, plateau scheduling with
// restart-from-best. Test-role samples are never fetched (enforced).
TrainResult train(const Manifest& manifest, const SplitAssignment& split,
                  const nn::ModelGraph& graph, nn::ParameterSet<float> params,
                  const TrainConfig& cfg);

}  // namespace weedpilot::train

#endif

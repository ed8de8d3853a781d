#ifndef WEEDPILOT_TRAIN_SCHEDULER_HPP
#define WEEDPILOT_TRAIN_SCHEDULER_HPP

#include <cmath>
#include <limits>
#include <string>

#include "weedpilot/core.hpp"

namespace weedpilot::train {

enum class SchedulerAction { Continue, HalveLR, Abort };

inline const char* scheduler_action_name(SchedulerAction a) {
  switch (a) {
    case SchedulerAction::HalveLR: return "halve_lr";
    case SchedulerAction::Abort: return "abort";
    default: return "continue";
  }
}

// Validation-loss plateau schedule: halve the learning rate after
// halve_patience stale epochs and abort after abort_patience (counted from
// the last strict improvement). A restart resumes from the best checkpoint
// at restart_lr with the stale counter cleared.
struct SchedulerConfig {
  int halve_patience = 16;
  int abort_patience = 32;
  double lr_init = 1e-4;
  double restart_lr = 0.5e-4;

  void validate() const {
    if (halve_patience <= 0 || abort_patience <= halve_patience)
      throw Error("scheduler: need 0 < halve_patience < abort_patience");
    if (lr_init <= 0 || restart_lr <= 0) throw Error("scheduler: learning rates must be > 0");
  }
};

struct SchedulerState {
  double best_val_loss = std::numeric_limits<double>::infinity();
  int epochs_since_improve = 0;
  double current_lr = 0.0;
  int epoch = 0;
  int restarts_done = 0;
  bool improved_last = false;

  static SchedulerState fresh(const SchedulerConfig& cfg) {
    SchedulerState s;
    s.current_lr = cfg.lr_init;
    return s;
  }
};

// One epoch-end update. "Did not decrease" is strict: only val_loss <
// best_val_loss resets the stale counter.
inline SchedulerAction scheduler_update(SchedulerState& state, double epoch_val_loss,
                                        const SchedulerConfig& cfg = {}) {
  cfg.validate();
  if (!std::isfinite(epoch_val_loss)) throw Error("scheduler: non-finite validation loss");
  state.epoch += 1;
  if (epoch_val_loss < state.best_val_loss) {
    state.best_val_loss = epoch_val_loss;
    state.epochs_since_improve = 0;
    state.improved_last = true;
    return SchedulerAction::Continue;
  }
  state.improved_last = false;
  state.epochs_since_improve += 1;
  if (state.epochs_since_improve >= cfg.abort_patience) return SchedulerAction::Abort;
  if (state.epochs_since_improve % cfg.halve_patience == 0) {
    state.current_lr /= 2.0;
    return SchedulerAction::HalveLR;
  }
  return SchedulerAction::Continue;
}

inline void scheduler_restart(SchedulerState& state, const SchedulerConfig& cfg = {}) {
  state.current_lr = cfg.restart_lr;
  state.epochs_since_improve = 0;
  state.restarts_done += 1;
}

}  // namespace weedpilot::train

#endif

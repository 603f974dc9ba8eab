#pragma once

#include <cstddef>
#include <vector>

#include "intent_rnnt/layers.hpp"

namespace intent_rnnt {

// Linear warm-up from 0 to peak_lr, a constant plateau, then exponential
// decay by decay_rate per step.
struct LrSchedule {
  double peak_lr = 1e-3;
  std::size_t warmup_steps = 100;
  std::size_t constant_steps = 1000;
  double decay_rate = 0.999;
};

double schedule_lr(const LrSchedule& schedule, std::size_t step);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  LrSchedule schedule;
};

// Scales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(const ParamList& params, double max_norm);

class AdamOptimizer {
 public:
  AdamOptimizer(AdamConfig config, ParamList params);

  // One update using the current gradient buffers; the learning rate is
  // schedule_lr at the post-increment step count.
  void step();

  std::size_t step_count() const { return step_; }
  const AdamConfig& config() const { return config_; }
  double current_lr() const { return schedule_lr(config_.schedule, step_); }

 private:
  AdamConfig config_;
  ParamList params_;
  std::vector<std::vector<double>> first_moment_;
  std::vector<std::vector<double>> second_moment_;
  std::size_t step_ = 0;
};

}  // namespace intent_rnnt

#include "intent_rnnt/optimizer.hpp"

#include <cmath>

#include "intent_rnnt/errors.hpp"

namespace intent_rnnt {

double schedule_lr(const LrSchedule& s, std::size_t step) {
  if (step < s.warmup_steps) return s.peak_lr * static_cast<double>(step) / static_cast<double>(s.warmup_steps);
  const std::size_t plateau_end = s.warmup_steps + s.constant_steps;
  if (step <= plateau_end) return s.peak_lr;
  return s.peak_lr * std::pow(s.decay_rate, static_cast<double>(step - plateau_end));
}

double clip_grad_norm(const ParamList& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    for (double g : p.tensor->grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (const auto& p : params)
      for (double& g : p.tensor->grad()) g *= scale;
  }
  return norm;
}

AdamOptimizer::AdamOptimizer(AdamConfig config, ParamList params)
    : config_(config), params_(std::move(params)) {
  for (const auto& p : params_) {
    if (!p.tensor->has_grad()) throw ArgumentError("optimizer parameter '" + p.name + "' has no gradient buffer");
    first_moment_.emplace_back(p.tensor->size(), 0.0);
    second_moment_.emplace_back(p.tensor->size(), 0.0);
  }
}

void AdamOptimizer::step() {
  ++step_;
  const double lr = schedule_lr(config_.schedule, step_);
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto value = params_[k].tensor->data();
    auto grad = params_[k].tensor->grad();
    auto& m = first_moment_[k];
    auto& v = second_moment_[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
      v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      value[i] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

}  // namespace intent_rnnt

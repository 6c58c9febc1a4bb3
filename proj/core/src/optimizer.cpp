#include "hygrpo/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "hygrpo/error.hpp"

namespace hygrpo {

AdamOptimizer::AdamOptimizer(std::size_t size, double beta1, double beta2,
                             double epsilon, double weight_decay)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon), weight_decay_(weight_decay) {
  state_.m = Vector(size);
  state_.v = Vector(size);
}

void AdamOptimizer::set_state(AdamState state) {
  require_same_size(state.m.size(), state_.m.size(), "adam state m");
  require_same_size(state.v.size(), state_.v.size(), "adam state v");
  state_ = std::move(state);
}

void AdamOptimizer::step(std::span<double> params, std::span<const double> grad, double lr) {
  require_same_size(params.size(), state_.m.size(), "adam params");
  require_same_size(grad.size(), state_.m.size(), "adam grad");
  ++state_.t;
  const double t = static_cast<double>(state_.t);
  const double c1 = 1.0 - std::pow(beta1_, t);
  const double c2 = 1.0 - std::pow(beta2_, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state_.m[i];
    double& v = state_.v[i];
    m = beta1_ * m + (1.0 - beta1_) * grad[i];
    v = beta2_ * v + (1.0 - beta2_) * grad[i] * grad[i];
    const double update = (m / c1) / (std::sqrt(v / c2) + epsilon_);
    params[i] -= lr * (update + weight_decay_ * params[i]);
  }
}

double scheduled_lr(LrSchedule schedule, double base, std::size_t step,
                    std::size_t total_steps) {
  if (schedule == LrSchedule::kConstant || total_steps == 0) return base;
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

std::string_view to_string(LrSchedule s) {
  return s == LrSchedule::kCosine ? "cosine" : "constant";
}

LrSchedule parse_lr_schedule(std::string_view name) {
  if (name == "cosine") return LrSchedule::kCosine;
  if (name == "constant") return LrSchedule::kConstant;
  throw ConfigError("trainer.lr_schedule",
                    "expected cosine or constant, got '" + std::string(name) + "'");
}

}  // namespace hygrpo

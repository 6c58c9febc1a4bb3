#pragma once

#include <cstdint>
#include <span>
#include <string_view>

#include "hygrpo/math.hpp"

namespace hygrpo {

struct AdamState {
  Vector m;
  Vector v;
  std::uint64_t t = 0;

  bool operator==(const AdamState&) const = default;
};

// Adam with decoupled weight decay. Minimizes: params -= lr * update.
class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t size, double beta1, double beta2, double epsilon,
                double weight_decay);

  void step(std::span<double> params, std::span<const double> grad, double lr);

  const AdamState& state() const { return state_; }
  void set_state(AdamState state);

 private:
  double beta1_;
  double beta2_;
  double epsilon_;
  double weight_decay_;
  AdamState state_;
};

enum class LrSchedule { kConstant, kCosine };

std::string_view to_string(LrSchedule s);
LrSchedule parse_lr_schedule(std::string_view name);

// Cosine decay from `base` at step 0 towards 0 at `total_steps`.
double scheduled_lr(LrSchedule schedule, double base, std::size_t step,
                    std::size_t total_steps);

}  // namespace hygrpo

#pragma once

#include <cstdint>
#include <vector>

#include "hygrpo/hygrpo.hpp"

namespace hygrpo {

// One-query, one-dimensional pose task. Vocabulary {END, POSE}; the only
// well-formed response is "POSE END" and its pose p earns
// R_c = exp(-(p - peak)^2 / (2 width^2)), maximised at p = peak.
struct BanditConfig {
  double peak = 1.0;
  double width = 0.5;
  std::size_t steps = 200;
  std::size_t group_size = 16;
  std::size_t batch_size = 2;
  double learning_rate = 3e-2;
};

struct BanditResult {
  // Pose mean for the well-formed response after each step; entry 0 is the
  // initial policy.
  std::vector<double> mean;
  double final_error = 0.0;
};

PolicyConfig bandit_policy_config();
TaskInstance bandit_task();
RewardBreakdown bandit_reward(const BanditConfig& config, const HybridResponse& response);
double bandit_mean(const Policy& policy);

BanditResult run_bandit(const BanditConfig& config, std::uint64_t seed);

}  // namespace hygrpo

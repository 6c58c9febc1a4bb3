#pragma once

#include <cstdint>
#include <vector>

#include "hygrpo/policy.hpp"
#include "hygrpo/tasks.hpp"

namespace hygrpo {

// Supervised warm start that produces pi_init before reinforcement
// fine-tuning. Token loss is cross-entropy on the target answer followed by
// END. The pose loss is the Gaussian negative log-likelihood of the ground
// truth, or squared error of the mean for a deterministic pose head.
struct PretrainConfig {
  std::size_t steps = 600;
  // The pose loss is applied during the last pose_steps steps only.
  std::size_t pose_steps = 40;
  std::size_t batch_size = 16;
  double learning_rate = 1e-2;
  double pose_weight = 1.0;

  void validate() const;
};

struct PretrainRecord {
  std::size_t step = 0;
  double token_loss = 0.0;
  double pose_loss = 0.0;
};

// Target tokens for a task: the pose template or the qa answer, then END.
Tokens target_tokens(const TaskInstance& task, const Vocabulary& vocab);

// Per-sample loss recorded on `tape`.
Var supervised_loss(GradTape& tape, const Policy& policy, const TaskInstance& task,
                    const Vocabulary& vocab, double pose_weight, double* token_loss = nullptr,
                    double* pose_loss = nullptr);

std::vector<PretrainRecord> pretrain(Policy& policy, const PretrainConfig& config,
                                     const TaskGenerator& world, std::uint64_t seed);

}  // namespace hygrpo

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hygrpo/checkpoint.hpp"
#include "hygrpo/config.hpp"
#include "hygrpo/evaluation.hpp"

namespace hygrpo {

// Task generator plus reward model for one configuration.
class World {
 public:
  explicit World(const RunConfig& config);
  World(const World&) = delete;
  World& operator=(const World&) = delete;

  const TaskGenerator& tasks() const { return tasks_; }
  const RewardModel& rewards() const { return rewards_; }
  Scorer scorer() const;

 private:
  TaskGenerator tasks_;
  RewardModel rewards_;
};

// Freshly initialised policy for `seed`, optionally with a deterministic
// pose head, before any warm start.
Policy make_policy(const RunConfig& config, std::uint64_t seed, bool deterministic_pose);
// make_policy followed by the supervised warm start.
Policy initial_policy(const RunConfig& config, const World& world, std::uint64_t seed,
                      bool deterministic_pose);

// The training batch of `step`, drawn from stream (seed, step).
std::vector<TaskInstance> training_batch(const RunConfig& config, const World& world,
                                         std::uint64_t seed, std::size_t step);

Checkpoint make_checkpoint(const RunConfig& config, const Trainer& trainer,
                           const std::string& variant);

struct TrainOptions {
  // Empty disables metrics and checkpoint files.
  std::filesystem::path out_dir;
  std::string variant = "hygrpo";
  std::optional<Checkpoint> resume;
  // Accept a resume checkpoint whose config hash differs.
  bool force = false;
  std::function<void(const StepMetrics&)> on_step;
};

struct TrainResult {
  std::vector<StepMetrics> metrics;
  Policy policy;
  // Stopped on a non-finite loss; the last good state was checkpointed.
  bool aborted = false;
};

// Runs trainer.steps iterations (continuing from options.resume if given).
// Writes metrics.jsonl and checkpoints/step_<k>.ckpt every checkpoint_every
// steps, at step 0 and at the end.
TrainResult run_training(const RunConfig& config, const World& world, Policy initial,
                         const TrainOptions& options);

std::filesystem::path checkpoint_path(const std::filesystem::path& out_dir, std::size_t step);

}  // namespace hygrpo

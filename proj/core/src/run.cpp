#include "hygrpo/run.hpp"

#include <sstream>

#include "hygrpo/error.hpp"
#include "hygrpo/metrics.hpp"
#include "hygrpo/pretrain.hpp"

namespace hygrpo {

World::World(const RunConfig& config)
    : tasks_(config.env, Vocabulary::standard()), rewards_(config.reward, tasks_) {}

Scorer World::scorer() const {
  return [this](const TaskInstance& task, const HybridResponse& response) {
    return rewards_.score(task, response);
  };
}

Policy make_policy(const RunConfig& config, std::uint64_t seed, bool deterministic_pose) {
  PolicyConfig pc = config.policy_config();
  pc.deterministic_pose = deterministic_pose;
  return Policy(pc, stream_seed({static_cast<std::uint64_t>(StreamTag::kInit), seed}),
                stream_seed({static_cast<std::uint64_t>(StreamTag::kEnvFixed),
                             config.env.world_seed}));
}

Policy initial_policy(const RunConfig& config, const World& world, std::uint64_t seed,
                      bool deterministic_pose) {
  Policy policy = make_policy(config, seed, deterministic_pose);
  if (config.pretrain.steps > 0) pretrain(policy, config.pretrain, world.tasks(), seed);
  return policy;
}

std::vector<TaskInstance> training_batch(const RunConfig& config, const World& world,
                                         std::uint64_t seed, std::size_t step) {
  Rng rng = make_rng(StreamTag::kTaskBatch, {seed, step});
  return world.tasks().batch(config.trainer.batch_size, rng);
}

Checkpoint make_checkpoint(const RunConfig& config, const Trainer& trainer,
                           const std::string& variant) {
  Checkpoint c;
  c.config_hash = config_hash(config);
  RunConfig stored = config;
  stored.out_dir.clear();
  c.config = dump_config(stored);
  c.variant = variant;
  c.seed = trainer.seed();
  c.step = trainer.step();
  c.params = trainer.policy().flatten();
  c.reference = trainer.reference().policy().flatten();
  c.adam = trainer.optimizer().state();
  return c;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& out_dir, std::size_t step) {
  std::ostringstream name;
  name << "step_" << step << ".ckpt";
  return out_dir / "checkpoints" / name.str();
}

TrainResult run_training(const RunConfig& config, const World& world, Policy initial,
                         const TrainOptions& options) {
  Trainer trainer(config.trainer, std::move(initial), world.scorer(), config.seed);
  if (options.resume) {
    const Checkpoint& c = *options.resume;
    if (c.config_hash != config_hash(config) && !options.force) {
      throw CheckpointError("checkpoint config hash differs from the run config");
    }
    if (c.seed != config.seed && !options.force) {
      throw CheckpointError("checkpoint seed " + std::to_string(c.seed) +
                            " differs from run seed " + std::to_string(config.seed));
    }
    Policy policy = trainer.policy();
    Policy reference = trainer.policy();
    policy.restore(c.params);
    reference.restore(c.reference);
    trainer.restore_state(policy, reference, c.adam, c.step);
  }

  const bool files = !options.out_dir.empty();
  std::optional<MetricsWriter> writer;
  if (files) {
    std::filesystem::create_directories(options.out_dir / "checkpoints");
    writer.emplace(options.out_dir / "metrics.jsonl", trainer.step());
  }
  auto save = [&] {
    if (files) {
      save_checkpoint(checkpoint_path(options.out_dir, trainer.step()),
                      make_checkpoint(config, trainer, options.variant));
    }
  };

  TrainResult result{{}, trainer.policy(), false};
  if (trainer.step() == 0) save();
  while (trainer.step() < config.trainer.steps) {
    const auto batch = training_batch(config, world, config.seed, trainer.step());
    StepMetrics m = trainer.train_step(batch);
    if (options.on_step) options.on_step(m);
    if (m.non_finite) {
      result.aborted = true;
      save();
      break;
    }
    if (writer) writer->write(m);
    result.metrics.push_back(std::move(m));
    const std::size_t step = trainer.step();
    if (step == config.trainer.steps ||
        (config.checkpoint_every > 0 && step % config.checkpoint_every == 0)) {
      save();
    }
  }
  result.policy = trainer.policy();
  return result;
}

}  // namespace hygrpo

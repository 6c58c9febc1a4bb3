#include "hygrpo/bandit.hpp"

#include <cmath>

namespace hygrpo {

namespace {
constexpr TokenId kEnd = 0;
constexpr TokenId kPose = 1;
}  // namespace

PolicyConfig bandit_policy_config() {
  PolicyConfig c;
  c.vocab_size = 2;
  c.end_token = kEnd;
  c.pose_token = kPose;
  c.embed_dim = 4;
  c.backbone_width = 8;
  c.token_hidden = 8;
  c.pose_hidden = 8;
  c.pose_dim = 1;
  c.image_dim = 0;
  c.max_len = 4;
  return c;
}

TaskInstance bandit_task() {
  TaskInstance t;
  t.query.prompt_tokens = {kPose};
  t.query.task = TaskKind::kText2Pose;
  return t;
}

RewardBreakdown bandit_reward(const BanditConfig& config, const HybridResponse& response) {
  RewardBreakdown r;
  const bool formatted =
      response.tokens.size() == 2 && response.tokens[0] == kPose && response.tokens[1] == kEnd;
  r.r_format = formatted ? 1 : 0;
  r.r_discrete = r.r_format;
  if (response.pose) {
    const double d = ((*response.pose)[0] - config.peak) / config.width;
    r.r_continuous = std::exp(-0.5 * d * d);
  }
  return r;
}

double bandit_mean(const Policy& policy) {
  const Tokens response = {kPose, kEnd};
  return policy.pose_head(bandit_task().query, response).mean[0];
}

BanditResult run_bandit(const BanditConfig& config, std::uint64_t seed) {
  TrainerConfig tc;
  tc.group_size = config.group_size;
  tc.batch_size = config.batch_size;
  tc.steps = config.steps;
  tc.learning_rate = config.learning_rate;
  Policy init(bandit_policy_config(), stream_seed({static_cast<std::uint64_t>(StreamTag::kInit), seed}));
  Scorer scorer = [config](const TaskInstance&, const HybridResponse& r) {
    return bandit_reward(config, r);
  };
  Trainer trainer(tc, std::move(init), scorer, seed);
  const std::vector<TaskInstance> batch(config.batch_size, bandit_task());
  BanditResult out;
  out.mean.push_back(bandit_mean(trainer.policy()));
  for (std::size_t s = 0; s < config.steps; ++s) {
    trainer.train_step(batch);
    out.mean.push_back(bandit_mean(trainer.policy()));
  }
  out.final_error = std::abs(out.mean.back() - config.peak);
  return out;
}

}  // namespace hygrpo

#include "hygrpo/pretrain.hpp"

#include "hygrpo/error.hpp"
#include "hygrpo/optimizer.hpp"

namespace hygrpo {

void PretrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("pretrain.batch_size", "must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("pretrain.learning_rate", "must be positive");
  if (!(pose_weight >= 0.0)) throw ConfigError("pretrain.pose_weight", "must be non-negative");
}

Tokens target_tokens(const TaskInstance& task, const Vocabulary& vocab) {
  Tokens out;
  if (task.query.task == TaskKind::kQa) {
    if (!task.gt_answer) throw ContractViolation("qa task without an answer");
    out = *task.gt_answer;
  } else {
    out = vocab.tokenize(kPoseTemplate);
  }
  out.push_back(vocab.end_token());
  return out;
}

Var supervised_loss(GradTape& tape, const Policy& policy, const TaskInstance& task,
                    const Vocabulary& vocab, double pose_weight, double* token_loss,
                    double* pose_loss) {
  const Tokens target = target_tokens(task, vocab);
  Var loss = tape.scale(policy.logp_discrete(tape, task.query, target), -1.0);
  if (token_loss) *token_loss = tape.scalar_value(loss);
  if (pose_loss) *pose_loss = 0.0;
  if (task.gt_pose && pose_weight > 0.0) {
    PoseVars head = policy.pose_head(tape, task.query, target);
    Var pl;
    if (policy.config().deterministic_pose) {
      Var diff = tape.sub(head.mean, tape.constant(*task.gt_pose));
      pl = tape.sum(tape.mul(diff, diff));
    } else {
      pl = tape.scale(tape.gaussian_logpdf(*task.gt_pose, head.mean, head.var), -1.0);
    }
    if (pose_loss) *pose_loss = tape.scalar_value(pl);
    loss = tape.add(loss, tape.scale(pl, pose_weight));
  }
  return loss;
}

std::vector<PretrainRecord> pretrain(Policy& policy, const PretrainConfig& config,
                                     const TaskGenerator& world, std::uint64_t seed) {
  config.validate();
  const std::size_t n = policy.parameter_count();
  AdamOptimizer adam(n, 0.9, 0.95, 1e-8, 0.0);
  std::vector<PretrainRecord> records;
  const double inv_b = 1.0 / static_cast<double>(config.batch_size);
  for (std::size_t step = 0; step < config.steps; ++step) {
    Rng rng = make_rng(StreamTag::kPretrain, {seed, step});
    const auto batch = world.batch(config.batch_size, rng);
    Vector grad(n);
    PretrainRecord rec;
    rec.step = step;
    for (const auto& task : batch) {
      GradTape tape(n);
      double tl = 0.0;
      double pl = 0.0;
      const double w = step + config.pose_steps >= config.steps ? config.pose_weight : 0.0;
      Var loss = supervised_loss(tape, policy, task, world.vocab(), w, &tl, &pl);
      const Vector g = tape.backward(loss);
      for (std::size_t i = 0; i < n; ++i) grad[i] += inv_b * g[i];
      rec.token_loss += inv_b * tl;
      rec.pose_loss += inv_b * pl;
    }
    Vector params = policy.flatten();
    adam.step(params.span(), grad, config.learning_rate);
    policy.restore(params);
    records.push_back(rec);
  }
  return records;
}

}  // namespace hygrpo

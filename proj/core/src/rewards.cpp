#include "hygrpo/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <string>

#include "hygrpo/error.hpp"

namespace hygrpo {

std::string_view to_string(ContinuousReward r) {
  switch (r) {
    case ContinuousReward::kNone:
      return "none";
    case ContinuousReward::kJoint:
      return "joint";
    case ContinuousReward::kSemantic:
      return "semantic";
  }
  return "none";
}

ContinuousReward parse_continuous_reward(std::string_view name) {
  for (auto r : {ContinuousReward::kNone, ContinuousReward::kJoint,
                 ContinuousReward::kSemantic}) {
    if (to_string(r) == name) return r;
  }
  throw ContractViolation("unknown continuous reward '" + std::string(name) + "'");
}

double joint_location_reward(std::span<const double> pred, std::span<const double> gt,
                             const KinematicChain& chain, double delta, bool* flagged) {
  const Vector jp = chain.joints_flat(pred);
  const Vector jg = chain.joints_flat(gt);
  if (!all_finite(jp) || !all_finite(jg)) {
    if (flagged) *flagged = true;
    return 0.0;
  }
  return 1.0 / (norm(jp - jg) + delta);
}

double semantic_alignment_reward(const Query& q, std::span<const double> pose,
                                 const RetrievalEncoders& enc) {
  if (q.task != TaskKind::kText2Pose) {
    throw ContractViolation("semantic reward needs a text2pose query");
  }
  return std::clamp(dot(enc.encode_text(q.prompt_tokens), enc.encode_pose(pose)), -1.0, 1.0);
}

int format_reward(std::string_view text, TaskKind task) {
  static const std::regex pose_pattern(R"(^The SMPL pose of this person is <POSE>\.$)");
  static const std::regex qa_pattern(R"(^The person is [a-z]+( [a-z]+)*\.$)");
  const std::string s(text);
  const auto& pattern = task == TaskKind::kQa ? qa_pattern : pose_pattern;
  return std::regex_match(s, pattern) ? 1 : 0;
}

int format_reward(std::span<const TokenId> tokens, const Vocabulary& vocab, TaskKind task) {
  if (tokens.empty() || tokens.back() != vocab.end_token()) return 0;
  return format_reward(vocab.detokenize(tokens.first(tokens.size() - 1)), task);
}

double text_similarity_reward(std::span<const TokenId> pred, std::span<const TokenId> gt,
                              const TextEmbedder& embedder) {
  const Vector a = embedder.embed(pred);
  const Vector b = embedder.embed(gt);
  return std::clamp(dot(a, b), -1.0, 1.0);
}

RewardModel::RewardModel(RewardConfig config, const TaskGenerator& world)
    : config_(config),
      world_(world),
      embedder_(world.vocab().size(), world.vocab().end_token()) {
  if (!(config.delta_joint > 0.0)) {
    throw ConfigError("reward.delta_joint", "must be positive");
  }
}

RewardBreakdown RewardModel::score(const TaskInstance& task,
                                   const HybridResponse& response) const {
  RewardBreakdown r;
  const TaskKind kind = task.query.task;
  r.r_format = format_reward(response.tokens, world_.vocab(), kind);
  r.r_discrete = r.r_format;
  if (kind == TaskKind::kQa && task.gt_answer) {
    r.r_text = text_similarity_reward(response.tokens, *task.gt_answer, embedder_);
    r.r_discrete += config_.w_text * *r.r_text;
  }
  if (!response.pose) return r;

  const auto slot = static_cast<std::size_t>(kind);
  switch (config_.map[slot]) {
    case ContinuousReward::kNone:
      break;
    case ContinuousReward::kJoint:
      if (task.gt_pose) {
        r.r_joint = joint_location_reward(*response.pose, *task.gt_pose, world_.chain(),
                                          config_.delta_joint, &r.flagged);
        r.r_continuous = r.r_joint;
      }
      break;
    case ContinuousReward::kSemantic:
      if (kind == TaskKind::kText2Pose) {
        r.r_semantic = semantic_alignment_reward(task.query, *response.pose,
                                                 world_.encoders());
        r.r_continuous = r.r_semantic;
      }
      break;
  }
  return r;
}

double mean_group_reward(TaskKind task, std::span<const RewardBreakdown> rewards) {
  if (rewards.empty()) return 0.0;
  double total = 0.0;
  for (const auto& r : rewards) {
    total += task == TaskKind::kQa ? r.r_discrete : r.r_continuous.value_or(0.0);
  }
  return total / static_cast<double>(rewards.size());
}

}  // namespace hygrpo

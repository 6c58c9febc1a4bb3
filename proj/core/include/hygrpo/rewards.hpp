#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>

#include "hygrpo/encoders.hpp"
#include "hygrpo/kinematics.hpp"
#include "hygrpo/tasks.hpp"
#include "hygrpo/types.hpp"
#include "hygrpo/vocab.hpp"

namespace hygrpo {

enum class ContinuousReward { kNone, kJoint, kSemantic };

std::string_view to_string(ContinuousReward r);
ContinuousReward parse_continuous_reward(std::string_view name);

struct RewardConfig {
  // Added to the joint error before inverting.
  double delta_joint = 1e-3;
  // Weight of the text-similarity reward in R_d for qa tasks.
  double w_text = 1.0;
  // Which reward feeds R_c, indexed like kAllTasks.
  std::array<ContinuousReward, 3> map = {ContinuousReward::kSemantic,
                                         ContinuousReward::kJoint,
                                         ContinuousReward::kNone};
};

struct RewardBreakdown {
  std::optional<double> r_joint;
  std::optional<double> r_semantic;
  int r_format = 0;
  std::optional<double> r_text;
  double r_discrete = 0.0;                 // R_d
  std::optional<double> r_continuous;      // R_c
  // Non-finite joints were produced for this candidate.
  bool flagged = false;

  bool operator==(const RewardBreakdown&) const = default;
};

// 1 / (||fk(pred) - fk(gt)||_2 + delta). Returns 0 and sets *flagged when the
// predicted joints are not finite.
double joint_location_reward(std::span<const double> pred, std::span<const double> gt,
                             const KinematicChain& chain, double delta,
                             bool* flagged = nullptr);

// cos(phi_t(q), phi_p(p)); requires a text2pose query.
double semantic_alignment_reward(const Query& q, std::span<const double> pose,
                                 const RetrievalEncoders& enc);

// Anchored, case-sensitive match of the rendered answer against the task's
// template. Pose tasks: "The SMPL pose of this person is <POSE>." exactly.
// qa: "The person is <lowercase words>." with no trigger.
int format_reward(std::string_view text, TaskKind task);
// Token form: the response must end with END; truncated responses score 0.
int format_reward(std::span<const TokenId> tokens, const Vocabulary& vocab, TaskKind task);

// cos(E(a_pred), E(a_gt)); 0 when either bag is empty.
double text_similarity_reward(std::span<const TokenId> pred, std::span<const TokenId> gt,
                              const TextEmbedder& embedder);

// Applies the task-appropriate subset of rewards and aggregates
// R_d = r_format + w_text * r_text (qa only) and R_c from the task's map.
// Mean group reward as reported in metrics: R_c for pose tasks, counting a
// candidate without a scored pose as 0, and R_d for qa. 0 for an empty group.
double mean_group_reward(TaskKind task, std::span<const RewardBreakdown> rewards);

class RewardModel {
 public:
  RewardModel(RewardConfig config, const TaskGenerator& world);

  const RewardConfig& config() const { return config_; }

  RewardBreakdown score(const TaskInstance& task, const HybridResponse& response) const;

 private:
  RewardConfig config_;
  const TaskGenerator& world_;
  TextEmbedder embedder_;
};

}  // namespace hygrpo

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "hygrpo/optimizer.hpp"
#include "hygrpo/policy.hpp"
#include "hygrpo/rewards.hpp"
#include "hygrpo/tape.hpp"
#include "hygrpo/tasks.hpp"

namespace hygrpo {

enum class ReferenceMode { kRefresh, kFixed };
// kDiscreteOnly drops the continuous surrogate and its KL (the GRPO ablation).
enum class Objective { kHybrid, kDiscreteOnly };

std::string_view to_string(ReferenceMode m);
std::string_view to_string(Objective o);
ReferenceMode parse_reference_mode(std::string_view s);
Objective parse_objective(std::string_view s);

struct TrainerConfig {
  std::size_t group_size = 8;
  double clip_epsilon = 0.2;
  double clip_epsilon_continuous = 0.2;
  double kl_beta = 0.04;
  double kl_beta_continuous = 0.04;
  double std_epsilon = 1e-6;
  double learning_rate = 3e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.95;
  double adam_epsilon = 1e-8;
  double weight_decay = 0.0;
  LrSchedule lr_schedule = LrSchedule::kCosine;
  std::size_t batch_size = 16;
  std::size_t steps = 1000;
  ReferenceMode reference = ReferenceMode::kRefresh;
  Objective objective = Objective::kHybrid;
  std::size_t threads = 1;

  // Throws ConfigError naming the offending key.
  void validate() const;
};

// z-scores with the population standard deviation; all zeros when the
// standard deviation is below `std_epsilon`. Throws on empty input.
std::vector<double> group_normalize(std::span<const double> values, double std_epsilon);

struct Candidate {
  HybridResponse response;
  RewardBreakdown reward;
  // Emitted exactly one pose and scored r_format = 1.
  bool in_v_set = false;
  // Reference-policy quantities for ratios and KL.
  double ref_logp_discrete = 0.0;
  std::optional<double> ref_logp_continuous;
  std::vector<Vector> ref_step_logits;
  std::optional<GaussianParams> ref_pose;
};

// G scored candidates for one query.
struct GroupBatch {
  TaskInstance task;
  std::vector<Candidate> candidates;
  std::vector<double> f_hat;          // per candidate
  std::vector<std::size_t> v_set;     // candidate indices
  std::vector<double> delta_hat;      // per v_set entry
};

// Fills v_set, f_hat (over R_d) and delta_hat (over R_c of the v_set).
void normalize_group(GroupBatch& batch, double std_epsilon);
// Recomputes every reference quantity of the batch under `ref`.
void attach_reference(GroupBatch& batch, const Policy& ref);

struct ImportanceRatios {
  double r_d = 1.0;
  std::optional<double> r_c;
  // exp of the total joint log-probability difference.
  double joint = 1.0;
};

// Ratios of a response under pi_theta and pi_ref. Throws ContractViolation if
// r_d * r_c disagrees with the joint ratio beyond 1e-12 relative.
ImportanceRatios importance_ratios(const Policy& theta, const Policy& ref, const Query& q,
                                   const HybridResponse& response);

struct GroupObjective {
  Var objective;  // J for this group, to be maximized
  double discrete_term = 0.0;
  double continuous_term = 0.0;
  double kl_discrete = 0.0;
  double kl_continuous = 0.0;
  std::size_t clipped = 0;
  std::size_t ratio_count = 0;
  std::vector<ImportanceRatios> ratios;  // per candidate
};

// Records the clipped HyGRPO objective of one group on `tape`:
//   1/G sum min(r_d F, clip(r_d) F) + 1/V sum_V min(r_c D, clip(r_c) D)
//   - beta_d 1/G sum KL_d - beta_c 1/V sum_V KL_c.
// The continuous term is 0 when V is empty. `reference_is_current` states that
// theta equals the reference bit for bit, which lets candidates whose
// advantage is zero skip taping (their ratio is 1 and KL gradient is 0).
GroupObjective hygrpo_objective(GradTape& tape, const GroupBatch& batch, const Policy& theta,
                                const TrainerConfig& config,
                                bool reference_is_current = false);

// Negated objective and its gradient for one group.
double hygrpo_loss(const GroupBatch& batch, const Policy& theta, const TrainerConfig& config);
Vector hygrpo_loss_gradient(const GroupBatch& batch, const Policy& theta,
                            const TrainerConfig& config);

using Scorer = std::function<RewardBreakdown(const TaskInstance&, const HybridResponse&)>;

struct TaskMetrics {
  TaskKind task = TaskKind::kQa;
  std::size_t groups = 0;
  double mean_group_reward = 0.0;
  double loss_discrete = 0.0;
  double loss_continuous = 0.0;
  double kl = 0.0;
  double clip_frac = 0.0;
  double v_over_g = 0.0;
};

struct StepMetrics {
  std::size_t step = 0;
  double learning_rate = 0.0;
  double loss = 0.0;
  std::vector<TaskMetrics> tasks;  // kAllTasks order, present tasks only
  // Every group had zero-variance advantages; no update was applied.
  bool degenerate = false;
  // The loss or gradient was not finite; no update was applied.
  bool non_finite = false;
  std::size_t dropped_candidates = 0;
  std::size_t skipped_groups = 0;
  // Filled when ratio recording is enabled.
  std::vector<ImportanceRatios> ratios;
};

// Samples G candidates per query, scores, normalizes and applies one Adam
// update per call. Candidate k of query i at step s draws from the stream
// (seed, s, i, k), so results do not depend on thread count.
class Trainer {
 public:
  Trainer(TrainerConfig config, Policy initial, Scorer scorer, std::uint64_t seed);

  const TrainerConfig& config() const { return config_; }
  const Policy& policy() const { return policy_; }
  const PolicySnapshot& reference() const { return reference_; }
  const AdamOptimizer& optimizer() const { return optimizer_; }
  std::size_t step() const { return step_; }
  std::uint64_t seed() const { return seed_; }

  // Resume support.
  void restore_state(const Policy& policy, const Policy& reference, AdamState adam,
                     std::size_t step);
  void set_reference(const Policy& reference) { reference_ = PolicySnapshot(reference); }
  void set_record_ratios(bool on) { record_ratios_ = on; }

  // Samples and scores the group for `task` without updating anything.
  GroupBatch build_group(const TaskInstance& task, std::size_t query_index) const;

  StepMetrics train_step(std::span<const TaskInstance> batch);

 private:
  TrainerConfig config_;
  Policy policy_;
  PolicySnapshot reference_;
  Scorer scorer_;
  AdamOptimizer optimizer_;
  std::uint64_t seed_;
  std::size_t step_ = 0;
  bool record_ratios_ = false;
};

}  // namespace hygrpo

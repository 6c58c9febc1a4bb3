#include "hygrpo/evaluation.hpp"

#include "hygrpo/error.hpp"

namespace hygrpo {

std::vector<TaskScore> evaluate(const Policy& policy, const std::vector<TaskInstance>& tasks,
                                const Scorer& scorer, std::size_t group_size,
                                std::uint64_t seed) {
  if (group_size == 0) throw ContractViolation("evaluate: group_size must be positive");
  std::vector<TaskScore> out;
  for (TaskKind kind : kAllTasks) {
    TaskScore score;
    score.task = kind;
    std::size_t formatted = 0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (tasks[i].query.task != kind) continue;
      ++score.queries;
      std::vector<RewardBreakdown> rewards;
      for (std::size_t k = 0; k < group_size; ++k) {
        Rng rng = make_rng(StreamTag::kEvalSample, {seed, i, k});
        rewards.push_back(scorer(tasks[i], policy.sample(tasks[i].query, rng)));
        formatted += rewards.back().r_format == 1 ? 1 : 0;
        ++total;
      }
      score.mean_group_reward += mean_group_reward(kind, rewards);
    }
    if (score.queries == 0) continue;
    score.mean_group_reward /= static_cast<double>(score.queries);
    score.format_rate = static_cast<double>(formatted) / static_cast<double>(total);
    out.push_back(score);
  }
  return out;
}

}  // namespace hygrpo

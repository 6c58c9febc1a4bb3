#pragma once

#include <cstdint>
#include <vector>

#include "hygrpo/hygrpo.hpp"

namespace hygrpo {

struct TaskScore {
  TaskKind task = TaskKind::kQa;
  std::size_t queries = 0;
  double mean_group_reward = 0.0;
  // Share of candidates with r_format = 1.
  double format_rate = 0.0;
};

// Draws `group_size` responses per task instance from the stream
// (seed, instance, candidate) and averages the per-group reward.
// Results follow kAllTasks order and skip absent kinds.
std::vector<TaskScore> evaluate(const Policy& policy, const std::vector<TaskInstance>& tasks,
                                const Scorer& scorer, std::size_t group_size,
                                std::uint64_t seed);

}  // namespace hygrpo

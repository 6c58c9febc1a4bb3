#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "hygrpo/math.hpp"

namespace hygrpo {

using TokenId = int;
using Tokens = std::vector<TokenId>;

enum class TaskKind { kText2Pose, kImage2Pose, kQa };

inline constexpr std::array<TaskKind, 3> kAllTasks = {
    TaskKind::kText2Pose, TaskKind::kImage2Pose, TaskKind::kQa};

std::string_view to_string(TaskKind kind);
// Throws ContractViolation for unknown names.
TaskKind parse_task_kind(std::string_view name);

// A task input: prompt tokens plus optional image features.
struct Query {
  Tokens prompt_tokens;
  std::optional<Vector> image_features;
  TaskKind task = TaskKind::kQa;
};

// Throws ContractViolation unless every token id is below `vocab_size` and
// image features are present exactly for image2pose queries.
void validate(const Query& query, std::size_t vocab_size);

// One sampled candidate (a, p).
struct HybridResponse {
  Tokens tokens;
  std::optional<Vector> pose;
  double logp_discrete = 0.0;
  std::optional<double> logp_continuous;
  // Hit max_len without emitting END.
  bool truncated = false;

  double total_logp() const {
    return logp_discrete + logp_continuous.value_or(0.0);
  }
};

}  // namespace hygrpo

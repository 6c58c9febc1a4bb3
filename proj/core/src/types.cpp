#include "hygrpo/types.hpp"

#include <string>

#include "hygrpo/error.hpp"

namespace hygrpo {

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kText2Pose:
      return "text2pose";
    case TaskKind::kImage2Pose:
      return "image2pose";
    case TaskKind::kQa:
      return "qa";
  }
  return "unknown";
}

TaskKind parse_task_kind(std::string_view name) {
  for (TaskKind k : kAllTasks) {
    if (to_string(k) == name) return k;
  }
  throw ContractViolation("unknown task kind '" + std::string(name) + "'");
}

void validate(const Query& query, std::size_t vocab_size) {
  for (TokenId t : query.prompt_tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab_size) {
      throw ContractViolation("query token " + std::to_string(t) +
                              " outside vocabulary of " +
                              std::to_string(vocab_size));
    }
  }
  const bool wants_image = query.task == TaskKind::kImage2Pose;
  if (wants_image != query.image_features.has_value()) {
    throw ContractViolation(
        "image features must be present exactly for image2pose queries");
  }
}

}  // namespace hygrpo

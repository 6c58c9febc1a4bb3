#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "hygrpo/hygrpo.hpp"

namespace hygrpo {

// One JSON object per task present in the step, newline terminated. Keys in
// order: step, task, mean_group_reward, loss_discrete, loss_continuous, kl,
// clip_frac, v_over_g, degenerate.
std::string metrics_jsonl(const StepMetrics& m);

// Appends JSONL records. On resume, `keep_before` drops any existing records
// at or after that step so the file matches an uninterrupted run.
class MetricsWriter {
 public:
  MetricsWriter(const std::filesystem::path& path, std::size_t keep_before);

  void write(const StepMetrics& m);

 private:
  std::ofstream out_;
};

}  // namespace hygrpo

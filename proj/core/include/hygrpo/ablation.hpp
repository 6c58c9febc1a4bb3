#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hygrpo/run.hpp"

namespace hygrpo {

// deterministic_head: mean regression, warm start only (the baseline row).
// distributional_head: Gaussian head, warm start only.
// hygrpo: distributional head plus the full hybrid objective.
// grpo_discrete_only: distributional head, token-branch objective only.
enum class Variant { kGrpoDiscreteOnly, kHygrpo, kDeterministicHead, kDistributionalHead };

inline constexpr std::array<Variant, 4> kAllVariants = {
    Variant::kGrpoDiscreteOnly, Variant::kHygrpo, Variant::kDeterministicHead,
    Variant::kDistributionalHead};

std::string_view to_string(Variant v);
// Throws ContractViolation for unknown names.
Variant parse_variant(std::string_view name);
bool uses_rft(Variant v);

struct VariantRun {
  Variant variant = Variant::kHygrpo;
  std::uint64_t seed = 0;
  // Held-out evaluation before and after reinforcement fine-tuning; equal for
  // variants without it.
  std::vector<TaskScore> initial;
  std::vector<TaskScore> final;
  std::vector<StepMetrics> curve;
  Vector initial_params;
  Vector final_params;
  std::vector<std::size_t> pose_head_offsets;  // [begin, end) of pose-head params
};

struct AblationResult {
  std::vector<Variant> variants;
  std::vector<std::uint64_t> seeds;
  std::vector<VariantRun> runs;

  const VariantRun& run(Variant v, std::uint64_t seed) const;
};

double task_reward(std::span<const TaskScore> scores, TaskKind task);

using AblationProgress = std::function<void(Variant, std::uint64_t seed, const StepMetrics*)>;

// Runs every variant on ablation.seeds consecutive seeds. Variants sharing a
// seed share the warm start and the training batches.
AblationResult run_ablation(const RunConfig& config, std::span<const Variant> variants,
                            const AblationProgress& progress = {});

// curves/<variant>_seed<k>.csv (step, task, mean_reward), summary.md and
// summary.json under `out_dir`.
void write_ablation(const AblationResult& result, const std::filesystem::path& out_dir);
std::string ablation_markdown(const AblationResult& result);

}  // namespace hygrpo

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "hygrpo/hygrpo.hpp"
#include "hygrpo/policy.hpp"
#include "hygrpo/pretrain.hpp"
#include "hygrpo/rewards.hpp"
#include "hygrpo/tasks.hpp"

namespace hygrpo {

struct AblationConfig {
  std::size_t seeds = 5;
  std::uint64_t first_seed = 1;
  // Responses drawn per evaluation instance.
  std::size_t eval_group_size = 8;
  std::uint64_t eval_seed = 0xe7a1ULL;
};

// Free policy widths; dimensions tied to the environment and vocabulary are
// filled in by RunConfig::policy_config().
struct PolicyShape {
  std::size_t embed_dim = 8;
  std::size_t backbone_width = 32;
  std::size_t token_hidden = 32;
  std::size_t pose_hidden = 32;
  std::size_t max_len = 16;
  double var_floor = 1e-4;
  bool deterministic_pose = false;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "runs/default";
  // 0 keeps only the final checkpoint.
  std::size_t checkpoint_every = 100;
  TrainerConfig trainer;
  PretrainConfig pretrain;
  PolicyShape policy;
  RewardConfig reward;
  EnvConfig env;
  AblationConfig ablation;

  PolicyConfig policy_config() const;
  // Throws ConfigError naming the first offending key.
  void validate() const;
};

struct ConfigKey {
  std::string section;
  std::string name;
  std::string description;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;

  std::string full_name() const { return section + "." + name; }
};

// Every recognised key in canonical order.
const std::vector<ConfigKey>& config_keys();

// Sectioned key = value text; ';' and '#' start comment lines. Unknown
// sections or keys, malformed values and failed validation raise ConfigError.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

// Canonical text: every key in config_keys() order with round-trip values.
std::string dump_config(const RunConfig& config);
// FNV-1a 64 of the canonical text without run.out_dir.
std::uint64_t config_hash(const RunConfig& config);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace hygrpo

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hygrpo::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kBadConfig = 2,
  kBadCheckpoint = 3,
  kNonFinite = 4,
  kLocked = 5,
};

struct CommonOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::size_t> steps;
  bool force = false;
};

struct TrainOptions {
  CommonOptions common;
  std::optional<std::filesystem::path> resume;
};

struct AblateOptions {
  CommonOptions common;
  std::vector<std::string> variants;
};

struct SampleOptions {
  CommonOptions common;
  std::vector<std::filesystem::path> checkpoints;
  std::string task = "text2pose";
  std::size_t index = 0;
  std::optional<std::string> prompt;
  std::optional<std::filesystem::path> trajectory;
};

struct EvalOptions {
  CommonOptions common;
  std::filesystem::path checkpoint;
};

int cmd_train(const TrainOptions& opts);
int cmd_ablate(const AblateOptions& opts);
int cmd_sample(const SampleOptions& opts);
int cmd_eval(const EvalOptions& opts);

}  // namespace hygrpo::cli

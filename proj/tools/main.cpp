#include <CLI11.hpp>
#include <cstdlib>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>
#include <string>

#include "commands.hpp"

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("hygrpo");
  logger->set_pattern("[%Y-%m-%d %H:%M:%S.%e] [%^%l%$] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("HYGRPO_LOG_LEVEL")) {
    const std::string level = env;
    if (level == "error") {
      spdlog::set_level(spdlog::level::err);
    } else if (level == "warn") {
      spdlog::set_level(spdlog::level::warn);
    } else if (level == "info") {
      spdlog::set_level(spdlog::level::info);
    } else if (level == "debug") {
      spdlog::set_level(spdlog::level::debug);
    } else {
      spdlog::warn("ignoring HYGRPO_LOG_LEVEL={} (expected error, warn, info or debug)", level);
    }
  }
}

void add_common(CLI::App* app, hygrpo::cli::CommonOptions& c, bool with_out, bool with_steps) {
  app->add_option("--config", c.config, "Config file (sectioned key = value)")
      ->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Override run.seed");
  if (with_out) app->add_option("--out", c.out, "Override run.out_dir");
  if (with_steps) app->add_option("--steps", c.steps, "Override trainer.steps");
  app->add_flag("--force", c.force, "Ignore config and lock mismatches");
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Hybrid discrete/continuous group-relative policy optimisation"};
  app.require_subcommand(1);

  hygrpo::cli::TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Warm start and reinforcement fine-tuning");
  add_common(train_cmd, train.common, true, true);
  train_cmd->add_option("--resume", train.resume, "Continue from a checkpoint")
      ->check(CLI::ExistingFile);

  hygrpo::cli::AblateOptions ablate;
  auto* ablate_cmd = app.add_subcommand("ablate", "Compare head and objective variants");
  add_common(ablate_cmd, ablate.common, true, true);
  ablate_cmd->add_option("--variant", ablate.variants,
                         "grpo_discrete_only, hygrpo, deterministic_head or "
                         "distributional_head; repeatable (default: all)");

  hygrpo::cli::SampleOptions sample;
  auto* sample_cmd = app.add_subcommand("sample", "Sample a response from a checkpoint");
  add_common(sample_cmd, sample.common, false, false);
  sample_cmd->add_option("--checkpoint", sample.checkpoints,
                         "Checkpoint file; repeat with --trajectory")
      ->required()
      ->check(CLI::ExistingFile);
  sample_cmd->add_option("--task", sample.task, "text2pose, image2pose or qa");
  sample_cmd->add_option("--index", sample.index, "Evaluation instance of that task");
  sample_cmd->add_option("--prompt", sample.prompt, "Custom prompt (text2pose or qa)");
  sample_cmd->add_option("--trajectory", sample.trajectory,
                         "Write one JSON line per checkpoint to this file");

  hygrpo::cli::EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the held-out set");
  add_common(eval_cmd, eval.common, false, false);
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  if (*train_cmd) return hygrpo::cli::cmd_train(train);
  if (*ablate_cmd) return hygrpo::cli::cmd_ablate(ablate);
  if (*sample_cmd) return hygrpo::cli::cmd_sample(sample);
  return hygrpo::cli::cmd_eval(eval);
}

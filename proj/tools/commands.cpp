#include "commands.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <fstream>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "hygrpo/ablation.hpp"
#include "hygrpo/error.hpp"
#include "hygrpo/run.hpp"

namespace hygrpo::cli {

namespace {

// Exclusive ownership of an output directory for the life of the process.
class DirectoryLock {
 public:
  DirectoryLock(const std::filesystem::path& dir, bool force) : path_(dir / ".lock") {
    std::filesystem::create_directories(dir);
    if (force) std::filesystem::remove(path_);
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      throw std::runtime_error(path_.string() +
                               " exists; another run owns this directory (use --force "
                               "to take it over)");
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
  }
  ~DirectoryLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path path_;
};

struct LockError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunConfig resolve_config(const CommonOptions& c) {
  RunConfig cfg = c.config ? load_config(*c.config) : RunConfig{};
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.out_dir = *c.out;
  if (c.steps) cfg.trainer.steps = *c.steps;
  cfg.validate();
  return cfg;
}

nlohmann::ordered_json scores_json(const std::vector<TaskScore>& scores) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& s : scores) {
    j[std::string(to_string(s.task))] = {{"mean_group_reward", s.mean_group_reward},
                                         {"format_rate", s.format_rate},
                                         {"queries", s.queries}};
  }
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

// Runs `body`, mapping library errors onto exit codes.
template <typename Fn>
int guarded(Fn&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    spdlog::error("invalid configuration: {}", e.what());
    return kBadConfig;
  } catch (const CheckpointError& e) {
    spdlog::error("checkpoint: {}", e.what());
    return kBadCheckpoint;
  } catch (const LockError& e) {
    spdlog::error("{}", e.what());
    return kLocked;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kFailure;
  }
}

std::unique_ptr<DirectoryLock> lock_dir(const std::filesystem::path& dir, bool force) {
  try {
    return std::make_unique<DirectoryLock>(dir, force);
  } catch (const std::runtime_error& e) {
    throw LockError(e.what());
  }
}

struct LoadedModel {
  RunConfig config;
  Checkpoint checkpoint;
};

LoadedModel load_model(const std::filesystem::path& path, const CommonOptions& c) {
  LoadedModel m;
  m.checkpoint = load_checkpoint(path);
  RunConfig stored = parse_config(m.checkpoint.config);
  if (c.config) {
    RunConfig given = resolve_config(c);
    given.out_dir.clear();
    if (config_hash(given) != m.checkpoint.config_hash && !c.force) {
      throw CheckpointError(path.string() +
                            " was written with a different config; pass --force to use "
                            "--config anyway");
    }
    m.config = given;
  } else {
    m.config = stored;
  }
  return m;
}

Policy restore_policy(const LoadedModel& m) {
  Policy p = make_policy(m.config, m.checkpoint.seed, m.config.policy.deterministic_pose);
  if (p.parameter_count() != m.checkpoint.params.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(m.checkpoint.params.size()) +
                          " parameters but the config implies " +
                          std::to_string(p.parameter_count()));
  }
  p.restore(m.checkpoint.params);
  return p;
}

}  // namespace

int cmd_train(const TrainOptions& opts) {
  return guarded([&] {
    const RunConfig cfg = resolve_config(opts.common);
    if (cfg.policy.deterministic_pose) {
      throw ConfigError("policy.deterministic_pose",
                        "reinforcement fine-tuning needs a distributional pose head");
    }
    const auto lock = lock_dir(cfg.out_dir, opts.common.force);
    write_text(cfg.out_dir / "config.cfg", dump_config(cfg));
    const World world(cfg);

    hygrpo::TrainOptions run;
    run.out_dir = cfg.out_dir;
    run.force = opts.common.force;
    Policy init = make_policy(cfg, cfg.seed, false);
    if (opts.resume) {
      run.resume = load_checkpoint(*opts.resume);
      spdlog::info("resuming from {} at step {}", opts.resume->string(), run.resume->step);
    } else {
      spdlog::info("warm start: {} supervised steps", cfg.pretrain.steps);
      init = initial_policy(cfg, world, cfg.seed, false);
    }
    run.on_step = [&](const StepMetrics& m) {
      if (m.degenerate) spdlog::warn("step {}: every group had zero-variance rewards", m.step);
      if (m.dropped_candidates > 0) {
        spdlog::warn("step {}: dropped {} candidates with non-finite log-probabilities",
                     m.step, m.dropped_candidates);
      }
      if (m.non_finite) spdlog::error("step {}: non-finite loss", m.step);
      if (m.step % 50 == 0 || m.step + 1 == cfg.trainer.steps) {
        std::string line;
        for (const auto& t : m.tasks) {
          line += fmt::format(" {}={:.4f}", to_string(t.task), t.mean_group_reward);
        }
        spdlog::info("step {} lr={:.3g} loss={:.5f}{}", m.step, m.learning_rate, m.loss, line);
      }
    };
    spdlog::info("training {} steps into {}", cfg.trainer.steps, cfg.out_dir.string());
    const TrainResult result = run_training(cfg, world, std::move(init), run);
    if (result.aborted) {
      spdlog::error("aborted on a non-finite loss; the last good checkpoint was kept");
      return static_cast<int>(kNonFinite);
    }

    const auto eval_tasks = world.tasks().eval_set(cfg.ablation.eval_seed);
    const auto scores = evaluate(result.policy, eval_tasks, world.scorer(),
                                 cfg.ablation.eval_group_size, cfg.ablation.eval_seed);
    nlohmann::ordered_json summary;
    summary["steps"] = cfg.trainer.steps;
    summary["seed"] = cfg.seed;
    summary["config_hash"] = fmt::format("{:016x}", config_hash(cfg));
    summary["eval"] = scores_json(scores);
    write_text(cfg.out_dir / "summary.json", summary.dump(2) + "\n");
    spdlog::info("done; summary in {}", (cfg.out_dir / "summary.json").string());
    return static_cast<int>(kOk);
  });
}

int cmd_ablate(const AblateOptions& opts) {
  return guarded([&] {
    RunConfig cfg = resolve_config(opts.common);
    if (opts.common.seed) cfg.ablation.first_seed = *opts.common.seed;
    std::vector<Variant> variants;
    for (const auto& name : opts.variants) {
      try {
        variants.push_back(parse_variant(name));
      } catch (const ContractViolation& e) {
        throw ConfigError("--variant", e.what());
      }
    }
    if (variants.empty()) variants.assign(kAllVariants.begin(), kAllVariants.end());
    const auto lock = lock_dir(cfg.out_dir, opts.common.force);
    write_text(cfg.out_dir / "config.cfg", dump_config(cfg));
    const auto result =
        run_ablation(cfg, variants, [&](Variant v, std::uint64_t seed, const StepMetrics* m) {
          if (!m) {
            spdlog::info("variant {} seed {}", to_string(v), seed);
          } else if (m->step % 100 == 0) {
            spdlog::debug("variant {} seed {} step {}", to_string(v), seed, m->step);
          }
        });
    write_ablation(result, cfg.out_dir);
    std::fputs(ablation_markdown(result).c_str(), stdout);
    return static_cast<int>(kOk);
  });
}

int cmd_sample(const SampleOptions& opts) {
  return guarded([&] {
    if (opts.checkpoints.size() > 1 && !opts.trajectory) {
      throw ConfigError("--checkpoint", "several checkpoints need --trajectory");
    }
    const TaskKind kind = [&] {
      try {
        return parse_task_kind(opts.task);
      } catch (const Error& e) {
        throw ConfigError("--task", e.what());
      }
    }();
    std::ofstream trajectory;
    if (opts.trajectory) {
      trajectory.open(*opts.trajectory, std::ios::binary | std::ios::trunc);
      if (!trajectory) throw Error("cannot write " + opts.trajectory->string());
    }
    for (const auto& path : opts.checkpoints) {
      const LoadedModel model = load_model(path, opts.common);
      const World world(model.config);
      const Policy policy = restore_policy(model);
      const Vocabulary& vocab = world.tasks().vocab();

      TaskInstance task;
      if (opts.prompt) {
        if (kind == TaskKind::kImage2Pose) {
          throw ConfigError("--prompt", "image2pose queries come from the evaluation set");
        }
        task.query.task = kind;
        task.query.prompt_tokens = vocab.tokenize(*opts.prompt);
        if (kind == TaskKind::kText2Pose) {
          task.gt_pose = world.tasks().encoders().planted_pose(task.query.prompt_tokens);
          task.planted = true;
        }
      } else {
        const auto eval = world.tasks().eval_set(model.config.ablation.eval_seed);
        std::vector<const TaskInstance*> of_kind;
        for (const auto& t : eval) {
          if (t.query.task == kind) of_kind.push_back(&t);
        }
        if (opts.index >= of_kind.size()) {
          throw ConfigError("--index", "must be below " + std::to_string(of_kind.size()));
        }
        task = *of_kind[opts.index];
      }

      Rng rng = make_rng(StreamTag::kEvalSample, {opts.common.seed.value_or(0), opts.index});
      const HybridResponse response = policy.sample(task.query, rng);
      const RewardBreakdown r = world.rewards().score(task, response);

      nlohmann::ordered_json j;
      j["checkpoint"] = path.string();
      j["step"] = model.checkpoint.step;
      j["task"] = to_string(kind);
      j["prompt"] = vocab.detokenize(task.query.prompt_tokens);
      j["answer"] = vocab.detokenize(response.tokens);
      j["truncated"] = response.truncated;
      if (response.pose) {
        j["pose"] = response.pose->values();
        const Matrix joints = world.tasks().chain().forward(*response.pose);
        for (std::size_t k = 0; k < joints.rows(); ++k) {
          const auto row = joints.row(k);
          j["joints"].push_back(std::vector<double>(row.begin(), row.end()));
        }
      }
      nlohmann::ordered_json rewards;
      rewards["format"] = r.r_format;
      if (r.r_semantic) rewards["semantic"] = *r.r_semantic;
      if (r.r_joint) rewards["joint"] = *r.r_joint;
      if (r.r_text) rewards["text"] = *r.r_text;
      rewards["discrete"] = r.r_discrete;
      if (r.r_continuous) rewards["continuous"] = *r.r_continuous;
      j["rewards"] = rewards;
      if (trajectory.is_open()) trajectory << j.dump() << '\n';
      std::fputs((j.dump(2) + "\n").c_str(), stdout);
    }
    return static_cast<int>(kOk);
  });
}

int cmd_eval(const EvalOptions& opts) {
  return guarded([&] {
    const LoadedModel model = load_model(opts.checkpoint, opts.common);
    const World world(model.config);
    const Policy policy = restore_policy(model);
    const std::uint64_t seed = opts.common.seed.value_or(model.config.ablation.eval_seed);
    const auto tasks = world.tasks().eval_set(model.config.ablation.eval_seed);
    const auto scores =
        evaluate(policy, tasks, world.scorer(), model.config.ablation.eval_group_size, seed);
    nlohmann::ordered_json j;
    j["checkpoint"] = opts.checkpoint.string();
    j["step"] = model.checkpoint.step;
    j["eval"] = scores_json(scores);
    std::fputs((j.dump(2) + "\n").c_str(), stdout);
    return static_cast<int>(kOk);
  });
}

}  // namespace hygrpo::cli

#include "hygrpo/ablation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>

#include "hygrpo/error.hpp"

namespace hygrpo {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kGrpoDiscreteOnly: return "grpo_discrete_only";
    case Variant::kHygrpo: return "hygrpo";
    case Variant::kDeterministicHead: return "deterministic_head";
    case Variant::kDistributionalHead: return "distributional_head";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : kAllVariants) {
    if (to_string(v) == name) return v;
  }
  throw ContractViolation("unknown variant '" + std::string(name) + "'");
}

bool uses_rft(Variant v) {
  return v == Variant::kGrpoDiscreteOnly || v == Variant::kHygrpo;
}

const VariantRun& AblationResult::run(Variant v, std::uint64_t seed) const {
  for (const auto& r : runs) {
    if (r.variant == v && r.seed == seed) return r;
  }
  throw ContractViolation("no run for variant " + std::string(to_string(v)) + " seed " +
                          std::to_string(seed));
}

double task_reward(std::span<const TaskScore> scores, TaskKind task) {
  for (const auto& s : scores) {
    if (s.task == task) return s.mean_group_reward;
  }
  throw ContractViolation("no score for task " + std::string(to_string(task)));
}

AblationResult run_ablation(const RunConfig& config, std::span<const Variant> variants,
                            const AblationProgress& progress) {
  const World world(config);
  const auto eval_tasks = world.tasks().eval_set(config.ablation.eval_seed);
  const Scorer scorer = world.scorer();
  auto score = [&](const Policy& p) {
    return evaluate(p, eval_tasks, scorer, config.ablation.eval_group_size,
                    config.ablation.eval_seed);
  };

  const Policy probe = make_policy(config, config.ablation.first_seed, false);
  AblationResult result;
  result.variants.assign(variants.begin(), variants.end());
  for (std::size_t i = 0; i < config.ablation.seeds; ++i) {
    const std::uint64_t seed = config.ablation.first_seed + i;
    result.seeds.push_back(seed);
    RunConfig run_config = config;
    run_config.seed = seed;
    std::optional<Policy> dist_init;
    std::vector<TaskScore> dist_scores;
    for (Variant v : variants) {
      VariantRun run;
      run.variant = v;
      run.seed = seed;
      if (progress) progress(v, seed, nullptr);
      if (v == Variant::kDeterministicHead) {
        const Policy p = initial_policy(run_config, world, seed, true);
        run.initial = run.final = score(p);
        run.initial_params = run.final_params = p.flatten();
      } else {
        if (!dist_init) {
          dist_init = initial_policy(run_config, world, seed, false);
          dist_scores = score(*dist_init);
        }
        run.initial = dist_scores;
        run.initial_params = dist_init->flatten();
        if (uses_rft(v)) {
          RunConfig rc = run_config;
          rc.trainer.objective =
              v == Variant::kHygrpo ? Objective::kHybrid : Objective::kDiscreteOnly;
          TrainOptions options;
          options.variant = std::string(to_string(v));
          if (progress) options.on_step = [&](const StepMetrics& m) { progress(v, seed, &m); };
          TrainResult tr = run_training(rc, world, *dist_init, options);
          if (tr.aborted) throw Error("non-finite loss in ablation run");
          run.curve = std::move(tr.metrics);
          run.final = score(tr.policy);
          run.final_params = tr.policy.flatten();
        } else {
          run.final = dist_scores;
          run.final_params = run.initial_params;
        }
      }
      run.pose_head_offsets = {probe.block("pose_trunk").offset, probe.parameter_count()};
      result.runs.push_back(std::move(run));
    }
  }
  return result;
}

namespace {

struct Row {
  std::string label;
  Variant variant;
};

const std::vector<Row>& table_rows() {
  static const std::vector<Row> rows = {
      {"Baseline", Variant::kDeterministicHead},
      {"+Dist.", Variant::kDistributionalHead},
      {"+Dist.+RFT", Variant::kHygrpo},
      {"GRPO (discrete only)", Variant::kGrpoDiscreteOnly},
  };
  return rows;
}

double mean_over_seeds(const AblationResult& r, Variant v, TaskKind task, bool final) {
  double total = 0.0;
  for (std::uint64_t seed : r.seeds) {
    const auto& run = r.run(v, seed);
    total += task_reward(final ? run.final : run.initial, task);
  }
  return total / static_cast<double>(r.seeds.size());
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

bool has(const AblationResult& r, Variant v) {
  return std::find(r.variants.begin(), r.variants.end(), v) != r.variants.end();
}

}  // namespace

std::string ablation_markdown(const AblationResult& result) {
  std::string out;
  out += "| Row | Variant | text2pose (semantic) | image2pose (joint) | qa |\n";
  out += "|---|---|---|---|---|\n";
  for (const auto& row : table_rows()) {
    if (!has(result, row.variant)) continue;
    out += "| " + row.label + " | " + std::string(to_string(row.variant));
    for (TaskKind task : kAllTasks) {
      out += " | " + fixed(mean_over_seeds(result, row.variant, task, true));
    }
    out += " |\n";
  }
  out += "\nMean group reward on the held-out evaluation set, averaged over " +
         std::to_string(result.seeds.size()) + " seeds.\n";
  return out;
}

void write_ablation(const AblationResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir / "curves");
  for (const auto& run : result.runs) {
    const auto path = out_dir / "curves" /
                      (std::string(to_string(run.variant)) + "_seed" +
                       std::to_string(run.seed) + ".csv");
    std::ofstream csv(path, std::ios::binary | std::ios::trunc);
    if (!csv) throw Error("cannot write " + path.string());
    csv << "step,task,mean_reward\n";
    if (run.curve.empty()) {
      for (const auto& s : run.final) {
        csv << 0 << ',' << to_string(s.task) << ',' << nlohmann::json(s.mean_group_reward).dump()
            << '\n';
      }
    }
    for (const auto& m : run.curve) {
      for (const auto& t : m.tasks) {
        csv << m.step << ',' << to_string(t.task) << ','
            << nlohmann::json(t.mean_group_reward).dump() << '\n';
      }
    }
  }

  nlohmann::ordered_json j;
  j["seeds"] = result.seeds;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : table_rows()) {
    if (!has(result, row.variant)) continue;
    nlohmann::ordered_json r;
    r["row"] = row.label;
    r["variant"] = to_string(row.variant);
    for (TaskKind task : kAllTasks) {
      r["mean"][std::string(to_string(task))] = mean_over_seeds(result, row.variant, task, true);
    }
    for (std::uint64_t seed : result.seeds) {
      const auto& run = result.run(row.variant, seed);
      nlohmann::ordered_json s;
      s["seed"] = seed;
      for (TaskKind task : kAllTasks) {
        s["initial"][std::string(to_string(task))] = task_reward(run.initial, task);
        s["final"][std::string(to_string(task))] = task_reward(run.final, task);
      }
      r["per_seed"].push_back(s);
    }
    j["rows"].push_back(r);
  }
  std::ofstream(out_dir / "summary.json", std::ios::binary | std::ios::trunc) << j.dump(2) << '\n';
  std::ofstream(out_dir / "summary.md", std::ios::binary | std::ios::trunc)
      << ablation_markdown(result);
}

}  // namespace hygrpo

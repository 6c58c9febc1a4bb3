// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include "format_corpus.hpp"
#include "hygrpo/ablation.hpp"
#include "hygrpo/bandit.hpp"
#include "hygrpo/checkpoint.hpp"
#include "hygrpo/hygrpo.hpp"
#include "hygrpo/metrics.hpp"
#include "hygrpo/rewards.hpp"
#include "hygrpo/run.hpp"
#include "oracles.hpp"
#include "small_run.hpp"
#include "toy.hpp"

using namespace hygrpo;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* title, const std::function<Outcome()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++failures;
  std::printf("%s criterion %d: %s (%s; %.1f s)\n", o.pass ? "PASS" : "FAIL", id, title,
              o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double mean_of(std::span<const double> v) { return sum(v) / static_cast<double>(v.size()); }

double pop_std(std::span<const double> v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

// Advantage list is standardised, or all zero when its inputs are constant.
bool standardised(std::span<const double> raw, std::span<const double> z) {
  if (raw.empty()) return z.empty();
  if (pop_std(raw) < 1e-6) return std::all_of(z.begin(), z.end(), [](double x) { return x == 0.0; });
  return std::abs(mean_of(z)) <= 1e-12 && std::abs(pop_std(z) - 1.0) <= 1e-12;
}

GroupBatch rich_batch(const Policy& ref, Rng& rng) {
  for (;;) {
    GroupBatch b = toy::sampled_batch(ref, 8, rng);
    if (b.v_set.size() >= 2) return b;
  }
}

double block_abs(const Vector& g, const ParameterBlock& b) {
  double s = 0.0;
  for (std::size_t i = b.offset; i < b.offset + b.size; ++i) s += std::abs(g[i]);
  return s;
}

Outcome gradient_check() {
  TrainerConfig cfg;
  cfg.reference = ReferenceMode::kFixed;
  cfg.kl_beta = 0.1;
  cfg.kl_beta_continuous = 0.1;
  Rng rng(101);
  double worst = 0.0;
  std::size_t params = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Policy ref(toy::config(), seed);
    params = ref.parameter_count();
    const GroupBatch b = rich_batch(ref, rng);
    Policy theta = toy::perturbed(ref, 0.05, rng);
    for (;;) {
      GradTape tape(theta.parameter_count());
      const auto obj = hygrpo_objective(tape, b, theta, cfg);
      bool near_kink = false;
      for (const auto& r : obj.ratios) {
        for (double x : {r.r_d, r.r_c.value_or(1.0)}) {
          near_kink |= std::abs(x - 1.2) < 1e-3 || std::abs(x - 0.8) < 1e-3;
        }
      }
      if (!near_kink) break;
      theta = toy::perturbed(ref, 0.05, rng);
    }
    const Vector g = hygrpo_loss_gradient(b, theta, cfg);
    const auto fd = oracle::finite_difference(
        [&](std::span<const double> x) {
          Policy local = theta;
          local.restore(x);
          return hygrpo_loss(b, local, cfg);
        },
        theta.flatten(), 1e-5);
    worst = std::max(worst, oracle::max_relative_error(g, fd));
  }
  return {params <= 50 && worst < 1e-4,
          fmt("%.0f parameters, worst relative error %.2e over 100 seeds", params, worst)};
}

Outcome advantage_check() {
  Rng rng(202);
  std::size_t bad = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 1 + rng.index(16);
    const bool constant = rng.uniform() < 0.1;
    const double scale = std::pow(10.0, rng.uniform(-3.0, 3.0));
    std::vector<double> v(n);
    for (double& x : v) x = constant ? 2.5 : scale * rng.normal();
    if (!standardised(v, group_normalize(v, 1e-6))) ++bad;
  }
  // Every group of a short training run.
  RunConfig config = fixture::small_run();
  config.trainer.steps = 20;
  const World world(config);
  Trainer trainer(config.trainer, make_policy(config, 1, false), world.scorer(), 1);
  std::size_t groups = 0;
  for (std::size_t s = 0; s < config.trainer.steps; ++s) {
    const auto batch = training_batch(config, world, 1, s);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const GroupBatch g = trainer.build_group(batch[i], i);
      std::vector<double> rd;
      std::vector<double> rc;
      for (const auto& c : g.candidates) rd.push_back(c.reward.r_discrete);
      for (std::size_t j : g.v_set) rc.push_back(*g.candidates[j].reward.r_continuous);
      if (!standardised(rd, g.f_hat) || !standardised(rc, g.delta_hat)) ++bad;
      ++groups;
    }
    trainer.train_step(batch);
  }
  return {bad == 0, fmt("%.0f violations in 10000 random groups and %.0f run groups", bad, groups)};
}

Outcome factorization_check() {
  RunConfig config = fixture::small_run();
  config.trainer.steps = 100;
  config.trainer.reference = ReferenceMode::kFixed;
  const World world(config);
  Trainer trainer(config.trainer, make_policy(config, 3, false), world.scorer(), 3);
  trainer.set_record_ratios(true);
  std::size_t checked = 0;
  double worst = 0.0;
  double spread = 0.0;
  for (std::size_t s = 0; s < config.trainer.steps; ++s) {
    const auto batch = training_batch(config, world, 3, s);
    const StepMetrics m = trainer.train_step(batch);
    for (const auto& r : m.ratios) {
      const double product = r.r_d * r.r_c.value_or(1.0);
      worst = std::max(worst, std::abs(product - r.joint) / std::max(1.0, std::abs(r.joint)));
      spread = std::max(spread, std::abs(std::log(r.joint)));
      ++checked;
    }
  }
  return {checked > 0 && worst <= 1e-12,
          fmt("%.0f candidates, worst deviation %.2e, max |log joint ratio| %.3f", checked,
              worst, spread)};
}

Outcome unit_expectation_check() {
  const RunConfig config;
  const World world(config);
  const Policy policy = make_policy(config, 4, false);
  Rng rng(404);
  const TaskInstance task = world.tasks().generate(TaskKind::kImage2Pose, rng);
  const Tokens a = Vocabulary::standard().tokenize(kPoseTemplate);
  Tokens with_end = a;
  with_end.push_back(Vocabulary::standard().end_token());
  const GaussianParams g_ref = policy.pose_head(task.query, with_end);
  // Literal on-policy check, then the same identity for a perturbed theta.
  const Policy theta = toy::perturbed(policy, 0.02, rng);
  const GaussianParams g_theta = theta.pose_head(task.query, with_end);
  double on = 0.0;
  double off = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const Vector p = sample_pose(g_ref, rng);
    const double lp_ref = gaussian_logpdf(p, g_ref);
    on += std::exp(gaussian_logpdf(p, policy.pose_head(task.query, with_end)) - lp_ref);
    off += std::exp(gaussian_logpdf(p, g_theta) - lp_ref);
  }
  on /= n;
  off /= n;
  const bool pass = on >= 0.97 && on <= 1.03 && off >= 0.97 && off <= 1.03;
  return {pass, fmt("mean r_c %.4f on-policy, %.4f for a perturbed theta", on, off)};
}

Outcome isolation_check() {
  Rng rng(505);
  TrainerConfig cfg;
  cfg.kl_beta = 0.0;
  cfg.kl_beta_continuous = 0.0;
  std::size_t violations = 0;
  double backbone = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Policy ref(toy::config(), seed);
    const Policy theta = toy::perturbed(ref, 0.05, rng);
    const GroupBatch b = rich_batch(ref, rng);
    GroupBatch no_delta = b;
    std::fill(no_delta.delta_hat.begin(), no_delta.delta_hat.end(), 0.0);
    const Vector g1 = hygrpo_loss_gradient(no_delta, theta, cfg);
    for (const char* name : {"pose_trunk", "pose_mean", "pose_var"}) {
      violations += block_abs(g1, theta.block(name)) != 0.0;
    }
    GroupBatch no_f = b;
    std::fill(no_f.f_hat.begin(), no_f.f_hat.end(), 0.0);
    const Vector g2 = hygrpo_loss_gradient(no_f, theta, cfg);
    violations += block_abs(g2, theta.block("token_head")) != 0.0;
    backbone += block_abs(g2, theta.block("backbone"));
  }
  return {violations == 0,
          fmt("%.0f non-zero head gradients in 50 seeds; shared backbone still receives %.3g",
              violations, backbone)};
}

Outcome scale_check() {
  Rng rng(606);
  const TrainerConfig cfg;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Policy ref(toy::config(), seed);
    const Policy theta = toy::perturbed(ref, 0.05, rng);
    const GroupBatch b = rich_batch(ref, rng);
    GroupBatch scaled = b;
    for (auto& c : scaled.candidates) {
      if (c.reward.r_continuous) *c.reward.r_continuous *= 1e3;
    }
    normalize_group(scaled, cfg.std_epsilon);
    const Vector g = hygrpo_loss_gradient(b, theta, cfg);
    const Vector gs = hygrpo_loss_gradient(scaled, theta, cfg);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double diff = std::abs(g[i] - gs[i]);
      if (diff > 0.0) worst = std::max(worst, diff / std::abs(g[i]));
    }
  }
  return {worst <= 1e-10, fmt("worst relative gradient change %.2e", worst)};
}

Outcome kl_check() {
  // Pairs are kept close enough that one 1e5-sample estimate has a standard
  // error well under the tolerance.
  Rng rng(707);
  double worst = 0.0;
  double worst_se = 0.0;
  bool self_zero = true;
  for (int pair = 0; pair < 20; ++pair) {
    GaussianParams a{Vector(4), Vector(4)};
    GaussianParams b{Vector(4), Vector(4)};
    for (std::size_t d = 0; d < 4; ++d) {
      a.mean[d] = rng.normal();
      a.diag_var[d] = 0.2 + rng.uniform();
      b.mean[d] = a.mean[d] + 0.3 * std::sqrt(a.diag_var[d]) * rng.normal();
      b.diag_var[d] = a.diag_var[d] * std::exp(0.3 * rng.normal());
    }
    double sum = 0.0;
    double sum_sq = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const Vector x = sample_pose(a, rng);
      const double l = gaussian_logpdf(x, a) - gaussian_logpdf(x, b);
      sum += l;
      sum_sq += l * l;
    }
    const double mc = sum / n;
    worst = std::max(worst, std::abs(mc - kl_gaussian(a, b)));
    worst_se = std::max(worst_se, std::sqrt((sum_sq / n - mc * mc) / n));
    self_zero &= kl_gaussian(a, a) == 0.0;
  }
  const Policy p(toy::config(), 7);
  self_zero &= kl_discrete(p, p, toy::query(), Tokens{1, 1, 0}) == 0.0;
  return {worst <= 0.01 && self_zero,
          fmt("worst |closed form - Monte Carlo| %.4f over 20 pairs, largest standard error "
              "%.4f; KL(p||p) ",
              worst, worst_se) +
              (self_zero ? "= 0" : "!= 0")};
}

const AblationResult& ablation() {
  static const AblationResult result = [] {
    RunConfig config;
    std::printf("running the ablation: %zu seeds, %zu steps per variant\n", config.ablation.seeds,
                config.trainer.steps);
    std::fflush(stdout);
    return run_ablation(config, kAllVariants);
  }();
  return result;
}

Outcome figure_check() {
  const AblationResult& r = ablation();
  int text_wins = 0;
  int image_wins = 0;
  double hy0 = 0.0, hy1 = 0.0, gr0 = 0.0, gr1 = 0.0;
  for (std::uint64_t seed : r.seeds) {
    const VariantRun& hy = r.run(Variant::kHygrpo, seed);
    const VariantRun& gr = r.run(Variant::kGrpoDiscreteOnly, seed);
    text_wins += task_reward(hy.final, TaskKind::kText2Pose) >
                 task_reward(gr.final, TaskKind::kText2Pose);
    image_wins += task_reward(hy.final, TaskKind::kImage2Pose) >
                  task_reward(gr.final, TaskKind::kImage2Pose);
    hy0 += task_reward(hy.initial, TaskKind::kText2Pose);
    hy1 += task_reward(hy.final, TaskKind::kText2Pose);
    gr0 += task_reward(gr.initial, TaskKind::kText2Pose);
    gr1 += task_reward(gr.final, TaskKind::kText2Pose);
  }
  const double hy_gain = (hy1 - hy0) / std::abs(hy0);
  const double gr_change = std::abs(gr1 - gr0) / std::abs(gr0);
  const int need = static_cast<int>(r.seeds.size()) - 1;
  const bool pass = text_wins >= need && image_wins >= need && hy_gain >= 0.5 && gr_change < 0.1;
  return {pass, fmt("wins text2pose %.0f/5, image2pose %.0f/5; semantic reward HyGRPO %+.1f%%, "
                    "GRPO %+.1f%%",
                    text_wins, image_wins, 100.0 * hy_gain, 100.0 * (gr1 - gr0) / std::abs(gr0))};
}

Outcome table_check() {
  const AblationResult& r = ablation();
  int text_wins = 0;
  int image_wins = 0;
  for (std::uint64_t seed : r.seeds) {
    const VariantRun& hy = r.run(Variant::kHygrpo, seed);
    const VariantRun& base = r.run(Variant::kDeterministicHead, seed);
    text_wins += task_reward(hy.final, TaskKind::kText2Pose) >
                 task_reward(base.final, TaskKind::kText2Pose);
    image_wins += task_reward(hy.final, TaskKind::kImage2Pose) >
                  task_reward(base.final, TaskKind::kImage2Pose);
  }
  const int need = static_cast<int>(r.seeds.size()) - 1;
  return {text_wins >= need && image_wins >= need,
          fmt("distributional head + RFT beats the deterministic head: text2pose %.0f/5, "
              "image2pose %.0f/5",
              text_wins, image_wins)};
}

Outcome bandit_check() {
  int ok = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const BanditResult r = run_bandit(BanditConfig{}, seed);
    ok += r.final_error < 0.1;
    worst = std::max(worst, r.final_error);
  }
  return {ok >= 9, fmt("%.0f/10 seeds within 0.1 of the peak; worst error %.4f", ok, worst)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism_check() {
  RunConfig config = fixture::small_run();
  config.trainer.steps = 8;
  config.checkpoint_every = 1;
  const World world(config);
  const Policy init = initial_policy(config, world, config.seed, false);
  const fs::path root = fs::temp_directory_path() / "hygrpo_acceptance";
  fs::remove_all(root);
  TrainOptions a;
  a.out_dir = root / "a";
  TrainOptions b;
  b.out_dir = root / "b";
  run_training(config, world, init, a);
  run_training(config, world, init, b);
  const std::string reference = slurp(a.out_dir / "metrics.jsonl");
  bool identical = !reference.empty() && reference == slurp(b.out_dir / "metrics.jsonl");
  std::size_t resumed_ok = 0;
  for (std::size_t k = 0; k < config.trainer.steps; ++k) {
    TrainOptions r;
    r.out_dir = root / ("resume_" + std::to_string(k));
    fs::create_directories(r.out_dir);
    fs::copy_file(a.out_dir / "metrics.jsonl", r.out_dir / "metrics.jsonl");
    r.resume = load_checkpoint(checkpoint_path(a.out_dir, k));
    run_training(config, world, init, r);
    resumed_ok += slurp(r.out_dir / "metrics.jsonl") == reference &&
                  slurp(checkpoint_path(r.out_dir, config.trainer.steps)) ==
                      slurp(checkpoint_path(a.out_dir, config.trainer.steps));
  }
  fs::remove_all(root);
  return {identical && resumed_ok == config.trainer.steps,
          std::string(identical ? "repeat run identical; " : "repeat run differs; ") +
              fmt("%.0f/%.0f resume points reproduce the uninterrupted run", resumed_ok,
                  config.trainer.steps)};
}

Outcome format_check() {
  const bool template_ok = format_reward(kPoseTemplate, TaskKind::kText2Pose) == 1;
  const auto corpus = corpus::near_miss_templates();
  std::size_t zeros = 0;
  for (const auto& s : corpus) zeros += format_reward(s, TaskKind::kText2Pose) == 0;
  return {template_ok && corpus.size() == 50 && zeros == corpus.size(),
          fmt("template scores %.0f; %.0f/%.0f near misses score 0", template_ok ? 1 : 0, zeros,
              corpus.size())};
}

}  // namespace

int main() {
  report(1, "loss gradient matches central differences", gradient_check);
  report(2, "group advantages are standardised", advantage_check);
  report(3, "ratio factorisation over a 100-step run", factorization_check);
  report(4, "on-policy continuous ratio has unit mean", unit_expectation_check);
  report(5, "gradient isolation between heads", isolation_check);
  report(6, "continuous reward scale invariance", scale_check);
  report(7, "Gaussian KL closed form", kl_check);
  report(8, "hybrid objective beats discrete-only GRPO", figure_check);
  report(9, "distributional head with RFT beats the deterministic head", table_check);
  report(10, "bandit convergence", bandit_check);
  report(11, "determinism and resume", determinism_check);
  report(12, "format reward exactness", format_check);
  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

#include <benchmark/benchmark.h>

#include "hygrpo/config.hpp"
#include "hygrpo/run.hpp"
#include "hygrpo/vocab.hpp"

using namespace hygrpo;

namespace {

const RunConfig& config() {
  static const RunConfig c;
  return c;
}

const World& world() {
  static const World w(config());
  return w;
}

void BM_SampleResponse(benchmark::State& state) {
  const Policy policy = make_policy(config(), 1, false);
  Rng rng(1);
  const TaskInstance task = world().tasks().generate(TaskKind::kText2Pose, rng);
  for (auto _ : state) benchmark::DoNotOptimize(policy.sample(task.query, rng));
}
BENCHMARK(BM_SampleResponse);

void BM_LogDensityGradient(benchmark::State& state) {
  const Policy policy = make_policy(config(), 1, false);
  Rng rng(2);
  const TaskInstance task = world().tasks().generate(TaskKind::kImage2Pose, rng);
  Tokens a = Vocabulary::standard().tokenize(kPoseTemplate);
  a.push_back(Vocabulary::standard().end_token());
  for (auto _ : state) {
    GradTape tape(policy.parameter_count());
    const PoseVars head = policy.pose_head(tape, task.query, a);
    const Var total = tape.add(policy.logp_discrete(tape, task.query, a),
                               tape.gaussian_logpdf(*task.gt_pose, head.mean, head.var));
    benchmark::DoNotOptimize(tape.backward(total));
  }
}
BENCHMARK(BM_LogDensityGradient);

void BM_TrainStep(benchmark::State& state) {
  TrainerConfig tc = config().trainer;
  tc.batch_size = static_cast<std::size_t>(state.range(0));
  Trainer trainer(tc, make_policy(config(), 1, false), world().scorer(), 1);
  std::size_t step = 0;
  for (auto _ : state) {
    const auto batch = training_batch(config(), world(), 1, step++);
    const std::span<const TaskInstance> view(batch.data(), std::min(batch.size(), tc.batch_size));
    benchmark::DoNotOptimize(trainer.train_step(view));
  }
}
BENCHMARK(BM_TrainStep)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

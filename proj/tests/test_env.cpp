#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "hygrpo/kinematics.hpp"
#include "hygrpo/policy.hpp"
#include "hygrpo/rewards.hpp"
#include "hygrpo/tasks.hpp"
#include "hygrpo/vocab.hpp"
#include "oracles.hpp"

using namespace hygrpo;

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 rodrigues(double x, double y, double z) {
  const double theta = std::sqrt(x * x + y * y + z * z);
  Mat3 r{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  if (theta == 0.0) return r;
  const double kx = x / theta, ky = y / theta, kz = z / theta;
  const double c = std::cos(theta), s = std::sin(theta), t = 1.0 - c;
  r = {{{c + kx * kx * t, kx * ky * t - kz * s, kx * kz * t + ky * s},
        {ky * kx * t + kz * s, c + ky * ky * t, ky * kz * t - kx * s},
        {kz * kx * t - ky * s, kz * ky * t + kx * s, c + kz * kz * t}}};
  return r;
}

Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) out[i][j] += a[i][k] * b[k][j];
  return out;
}

// Joint k+1 = joint k + (R_0 ... R_k) e_x.
std::vector<double> fk_oracle(std::span<const double> pose, std::size_t n) {
  std::vector<double> out(3 * n, 0.0);
  Mat3 acc{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  for (std::size_t k = 0; k + 1 < n; ++k) {
    acc = matmul(acc, rodrigues(pose[3 * k], pose[3 * k + 1], pose[3 * k + 2]));
    for (int d = 0; d < 3; ++d) out[3 * (k + 1) + d] = out[3 * k + d] + acc[d][0];
  }
  return out;
}

Vector random_pose(Rng& rng, std::size_t dim, double scale) {
  Vector p(dim);
  for (double& v : p) v = scale * rng.normal();
  return p;
}

const TaskGenerator& world() {
  static const TaskGenerator gen(EnvConfig{}, Vocabulary::standard());
  return gen;
}

}  // namespace

TEST(Kinematics, ZeroPoseIsStraightAlongX) {
  const KinematicChain chain(4);
  const Matrix j = chain.forward(Vector(12));
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(j(k, 0), static_cast<double>(k));
    EXPECT_EQ(j(k, 1), 0.0);
    EXPECT_EQ(j(k, 2), 0.0);
  }
}

TEST(Kinematics, HalfTurnAboutZFlipsChain) {
  const KinematicChain chain(4);
  Vector pose(12);
  pose[2] = std::numbers::pi;
  const Matrix j = chain.forward(pose);
  EXPECT_NEAR(j(3, 0), -3.0, 1e-12);
  EXPECT_NEAR(j(3, 1), 0.0, 1e-12);
  EXPECT_NEAR(j(3, 2), 0.0, 1e-12);
}

TEST(Kinematics, TipWithinReach) {
  const KinematicChain chain(4);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Matrix j = chain.forward(random_pose(rng, 12, 2.0));
    EXPECT_LE(norm(j.row(3)), 3.0 + 1e-12);
  }
}

TEST(Kinematics, MatchesCompositionOracle) {
  const KinematicChain chain(4);
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const Vector pose = random_pose(rng, 12, 1.0);
    const Vector got = chain.joints_flat(pose);
    const auto want = fk_oracle(pose, 4);
    for (std::size_t d = 0; d < 12; ++d) EXPECT_NEAR(got[d], want[d], 1e-12);
  }
}

TEST(Kinematics, JacobianFiniteAndAgreesWithOracle) {
  const KinematicChain chain(4);
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const Vector pose = random_pose(rng, 12, 1.0);
    for (std::size_t out = 0; out < 12; ++out) {
      const auto lib = oracle::finite_difference(
          [&](std::span<const double> p) { return chain.joints_flat(p)[out]; }, pose);
      const auto ref = oracle::finite_difference(
          [&](std::span<const double> p) { return fk_oracle(p, 4)[out]; }, pose);
      for (double g : lib) EXPECT_TRUE(std::isfinite(g));
      EXPECT_LT(oracle::max_relative_error(lib, ref, 1e-7), 1e-4);
    }
  }
}

TEST(Kinematics, Deterministic) {
  const KinematicChain chain(4);
  Rng rng(4);
  const Vector pose = random_pose(rng, 12, 1.0);
  EXPECT_EQ(chain.joints_flat(pose), chain.joints_flat(pose));
}

TEST(Tasks, PlantedPoseMaximisesSemanticReward) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const TaskInstance t = world().generate(TaskKind::kText2Pose, rng);
    ASSERT_TRUE(t.planted && t.gt_pose);
    EXPECT_NEAR(semantic_alignment_reward(t.query, *t.gt_pose, world().encoders()), 1.0, 1e-12);
  }
}

TEST(Tasks, PlantedPoseBeatsRandomPoses) {
  Rng rng(6);
  const TaskInstance t = world().generate(TaskKind::kText2Pose, rng);
  const double best = semantic_alignment_reward(t.query, *t.gt_pose, world().encoders());
  int beaten = 0;
  for (int i = 0; i < 1000; ++i) {
    const Vector p = random_pose(rng, 12, 1.0);
    beaten += best > semantic_alignment_reward(t.query, p, world().encoders()) ? 1 : 0;
  }
  EXPECT_GE(beaten, 950);
}

TEST(Tasks, SemanticRewardIsCosineOfAngle) {
  Rng rng(7);
  const TaskInstance t = world().generate(TaskKind::kText2Pose, rng);
  const auto& enc = world().encoders();
  const Vector target = enc.encode_text(t.query.prompt_tokens);
  for (int i = 0; i < 100; ++i) {
    const Vector p = random_pose(rng, 12, 1.0);
    EXPECT_NEAR(semantic_alignment_reward(t.query, p, enc), dot(target, enc.encode_pose(p)), 1e-12);
    EXPECT_NEAR(norm(enc.encode_pose(p)), 1.0, 1e-12);
  }
}

TEST(Tasks, ImageChannelIsInjective) {
  EXPECT_EQ(column_rank(world().channel().matrix()), 12u);
  Rng rng(8);
  const Vector a = random_pose(rng, 12, 1.0);
  Vector b = a;
  b[5] += 1e-3;
  Rng noise(0);
  EXPECT_NE(world().channel().observe(a, 0.0, noise), world().channel().observe(b, 0.0, noise));
  EXPECT_EQ(world().channel().observe(a, 0.0, noise), matvec(world().channel().matrix(), a));
}

TEST(Tasks, ImageFeaturesFollowGroundTruth) {
  EnvConfig cfg;
  cfg.noise_sigma = 0.0;
  const TaskGenerator gen(cfg, Vocabulary::standard());
  Rng rng(9);
  for (int i = 0; i < 20; ++i) {
    const TaskInstance t = gen.generate(TaskKind::kImage2Pose, rng);
    ASSERT_TRUE(t.query.image_features && t.gt_pose);
    EXPECT_EQ(*t.query.image_features,
              matvec(gen.channel().matrix(), gen.chain().joints_flat(*t.gt_pose)));
  }
}

TEST(Tasks, FixedSeedReproduces) {
  Rng a(10);
  Rng b(10);
  const auto x = world().batch(16, a);
  const auto y = world().batch(16, b);
  ASSERT_EQ(x.size(), y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(task_to_json(x[i], world().vocab()), task_to_json(y[i], world().vocab()));
  }
}

TEST(Tasks, BatchFollowsMix) {
  EXPECT_EQ(world().batch_counts(16), (std::array<std::size_t, 3>{6, 6, 4}));
  EXPECT_EQ(world().batch_counts(1)[0] + world().batch_counts(1)[1] + world().batch_counts(1)[2], 1u);
  Rng rng(11);
  const auto b = world().batch(16, rng);
  EXPECT_EQ(b.front().query.task, TaskKind::kText2Pose);
  EXPECT_EQ(b.back().query.task, TaskKind::kQa);
}

TEST(Tasks, QaBankHasSixteenPairs) {
  const auto bank = qa_bank(Vocabulary::standard());
  EXPECT_EQ(bank.size(), 16u);
  for (const auto& pair : bank) {
    EXPECT_EQ(format_reward(Vocabulary::standard().detokenize(pair.answer), TaskKind::kQa), 1);
  }
}

TEST(Tasks, EveryQueryValidates) {
  Rng rng(12);
  for (TaskKind kind : kAllTasks) {
    for (int i = 0; i < 50; ++i) {
      EXPECT_NO_THROW(validate(world().generate(kind, rng).query, Vocabulary::standard().size()));
    }
  }
}

TEST(Fusion, ZeroFineProjectionIgnoresFineBranch) {
  DualFusion f(16, 4, 12, 8, 1, 2);
  for (double& w : f.fine_projection().span()) w = 0.0;
  Rng rng(13);
  const Vector x = random_pose(rng, 16, 1.0);
  const auto out = f.fuse(x);
  EXPECT_EQ(out[1], Vector(8));
  EXPECT_EQ(out[0], matvec(f.coarse_projection(), f.coarse_features(x)));
}

TEST(Fusion, FineInputMattersIffProjectionNonzero) {
  DualFusion f(16, 4, 12, 8, 1, 2);
  Rng rng(14);
  const Vector x = random_pose(rng, 16, 1.0);
  Vector y = x;
  y[3] += 0.5;
  ASSERT_NE(f.fine_features(x), f.fine_features(y));
  EXPECT_NE(f.fuse(x)[1], f.fuse(y)[1]);
  for (double& w : f.fine_projection().span()) w = 0.0;
  EXPECT_EQ(f.fuse(x)[1], f.fuse(y)[1]);
}

TEST(Fusion, TapedMatchesPlain) {
  DualFusion f(16, 4, 12, 8, 3, 4);
  Rng rng(15);
  const Vector x = random_pose(rng, 16, 1.0);
  GradTape tape(f.parameter_count());
  const auto taped = f.fuse(tape, x, 0);
  const auto plain = f.fuse(x);
  EXPECT_EQ(tape.value(taped[0]), plain[0]);
  EXPECT_EQ(tape.value(taped[1]), plain[1]);
}

TEST(Fusion, BothProjectionsReceiveGradient) {
  PolicyConfig cfg;
  cfg.max_len = 8;
  Rng rng(16);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Policy p(cfg, seed, seed + 7);
    const TaskInstance t = world().generate(TaskKind::kImage2Pose, rng);
    const Tokens a{5, 1, 0};
    GradTape tape(p.parameter_count());
    const PoseVars head = p.pose_head(tape, t.query, a);
    const Var loss = tape.add(p.logp_discrete(tape, t.query, a),
                              tape.gaussian_logpdf(*t.gt_pose, head.mean, head.var));
    const Vector g = tape.backward(loss);
    for (const char* name : {"fusion_coarse", "fusion_fine"}) {
      const auto& b = p.block(name);
      double mag = 0.0;
      for (std::size_t i = b.offset; i < b.offset + b.size; ++i) mag += std::abs(g[i]);
      EXPECT_GT(mag, 0.0) << name << " seed " << seed;
    }
  }
}

TEST(Tasks, ExportWritesOneLinePerTask) {
  const auto tasks = world().eval_set(3);
  EXPECT_EQ(tasks.size(), 3 * world().config().eval_size);
  const auto path = std::filesystem::temp_directory_path() / "hygrpo_export_test.jsonl";
  export_tasks(path, tasks, world().vocab());
  std::ifstream in(path);
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  EXPECT_EQ(lines, tasks.size());
  std::filesystem::remove(path);
}

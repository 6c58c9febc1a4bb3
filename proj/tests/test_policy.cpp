#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hygrpo/error.hpp"
#include "hygrpo/policy.hpp"
#include "oracles.hpp"

using namespace hygrpo;

namespace {

PolicyConfig small_config() {
  PolicyConfig c;
  c.vocab_size = 6;
  c.end_token = 0;
  c.pose_token = 1;
  c.embed_dim = 4;
  c.backbone_width = 8;
  c.token_hidden = 8;
  c.pose_hidden = 8;
  c.pose_dim = 3;
  c.image_dim = 5;
  c.coarse_dim = 2;
  c.fine_dim = 3;
  c.max_len = 6;
  return c;
}

Query text_query() { return Query{{2, 3, 4}, std::nullopt, TaskKind::kText2Pose}; }

Query image_query(std::uint64_t seed) {
  Rng rng(seed);
  Vector image(5);
  for (double& v : image) v = rng.normal();
  return Query{{5, 2}, image, TaskKind::kImage2Pose};
}

GaussianParams random_gaussian(Rng& rng, std::size_t d) {
  GaussianParams g{Vector(d), Vector(d)};
  for (std::size_t i = 0; i < d; ++i) {
    g.mean[i] = rng.normal();
    g.diag_var[i] = 0.1 + rng.uniform() * 2.0;
  }
  return g;
}

}  // namespace

TEST(EncodeState, DeterministicAndPrefixSensitive) {
  const Policy p(small_config(), 1);
  const Query q = text_query();
  EXPECT_EQ(p.encode_state(q, {}), p.encode_state(q, {}));
  const Tokens prefix{1};
  EXPECT_NE(p.encode_state(q, {}), p.encode_state(q, prefix));
}

TEST(EncodeState, ImageFeaturesChangeTheEmbedding) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Policy p(small_config(), seed);
    EXPECT_NE(p.encode_state(image_query(seed), {}), p.encode_state(image_query(seed + 1000), {}));
  }
}

TEST(SampleDiscrete, SingleTerminatorVocabulary) {
  PolicyConfig c = small_config();
  c.vocab_size = 1;
  c.pose_token = std::nullopt;
  c.image_dim = 0;
  const Policy p(c, 3);
  Rng rng(1);
  for (int i = 0; i < 10; ++i) {
    const auto s = p.sample_discrete(Query{{0}, std::nullopt, TaskKind::kQa}, rng);
    EXPECT_EQ(s.tokens, (Tokens{0}));
    EXPECT_EQ(s.logp, 0.0);
    EXPECT_FALSE(s.truncated);
  }
}

TEST(SampleDiscrete, FixedSeedReproduces) {
  const Policy p(small_config(), 4);
  Rng a(99);
  Rng b(99);
  const auto sa = p.sample_discrete(text_query(), a);
  const auto sb = p.sample_discrete(text_query(), b);
  EXPECT_EQ(sa.tokens, sb.tokens);
  EXPECT_EQ(sa.logp, sb.logp);
}

TEST(SampleDiscrete, LogpIsSumOfStepLogprobs) {
  const Policy p(small_config(), 5);
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const auto s = p.sample_discrete(text_query(), rng);
    double total = 0.0;
    for (std::size_t t = 0; t < s.tokens.size(); ++t) {
      const Vector logits = p.token_logits(text_query(), std::span(s.tokens).first(t));
      total += oracle::log_softmax_long(logits, static_cast<std::size_t>(s.tokens[t]));
    }
    EXPECT_NEAR(s.logp, total, 1e-12);
    EXPECT_EQ(s.logp, p.logp_discrete(text_query(), s.tokens));
  }
}

TEST(SampleDiscrete, TruncatesAtMaxLen) {
  PolicyConfig c = small_config();
  c.max_len = 2;
  const Policy p(c, 6);
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    const auto s = p.sample_discrete(text_query(), rng);
    EXPECT_LE(s.tokens.size(), 2u);
    EXPECT_EQ(s.truncated, s.tokens.back() != c.end_token);
  }
}

TEST(SampleDiscrete, FrequenciesMatchSoftmax) {
  PolicyConfig c = small_config();
  c.vocab_size = 3;
  c.image_dim = 0;
  const Policy p(c, 8);
  const Query q{{2}, std::nullopt, TaskKind::kQa};
  const Vector probs = softmax(p.token_logits(q, {}));
  std::vector<int> counts(3);
  Rng rng(8);
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++counts[p.sample_discrete(q, rng).tokens.front()];
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(counts[k] / double(n), probs[k], 0.02);
}

TEST(PoseHead, ZeroWeightsGiveSoftplusOfZero) {
  Policy p(small_config(), 9);
  for (Mlp* head : {&p.pose_mean_head(), &p.pose_var_head()}) {
    for (auto& layer : head->layers()) {
      for (double& w : layer.weight.span()) w = 0.0;
      for (double& b : layer.bias) b = 0.0;
    }
  }
  const GaussianParams g = p.pose_head(text_query(), Tokens{1, 0});
  for (std::size_t d = 0; d < 3; ++d) {
    EXPECT_EQ(g.mean[d], 0.0);
    EXPECT_NEAR(g.diag_var[d], std::log(2.0) + 1e-4, 1e-15);
  }
}

TEST(PoseHead, FiniteAndDeterministicAcrossSeeds) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const Policy p(small_config(), seed);
    const Query q = image_query(seed);
    const GaussianParams g = p.pose_head(q, Tokens{3, 1, 0});
    EXPECT_TRUE(all_finite(g.mean) && all_finite(g.diag_var));
    for (double v : g.diag_var) EXPECT_GE(v, 1e-4);
    const GaussianParams again = p.pose_head(q, Tokens{3, 1, 0});
    EXPECT_EQ(g.mean, again.mean);
    EXPECT_EQ(g.diag_var, again.diag_var);
  }
}

TEST(PoseHead, MissingTriggerIsContractViolation) {
  const Policy p(small_config(), 10);
  EXPECT_THROW(p.pose_head(text_query(), Tokens{2, 0}), ContractViolation);
}

TEST(PoseHead, TapedMatchesPlainBitForBit) {
  const Policy p(small_config(), 11);
  const Query q = image_query(11);
  const Tokens a{4, 1, 0};
  GradTape tape(p.parameter_count());
  const PoseVars v = p.pose_head(tape, q, a);
  const GaussianParams g = p.pose_head(q, a);
  EXPECT_EQ(tape.value(v.mean), g.mean);
  EXPECT_EQ(tape.value(v.var), g.diag_var);
  EXPECT_EQ(tape.scalar_value(p.logp_discrete(tape, q, a)), p.logp_discrete(q, a));
}

TEST(GaussianLogpdf, UnitVarianceAtMean) {
  const GaussianParams g{Vector(12), Vector(12, 1.0)};
  EXPECT_NEAR(gaussian_logpdf(Vector(12), g), -6.0 * std::log(2.0 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(gaussian_logpdf(Vector(12), g), -11.0273, 1e-4);
}

TEST(GaussianLogpdf, TranslationInvariant) {
  Rng rng(12);
  const GaussianParams g = random_gaussian(rng, 4);
  const Vector p{0.5, -0.2, 1.0, 0.0};
  const Vector shift(4, 3.25);
  const GaussianParams moved{g.mean + shift, g.diag_var};
  EXPECT_NEAR(gaussian_logpdf(p, g), gaussian_logpdf(p + shift, moved), 1e-12);
}

TEST(GaussianLogpdf, MatchesLongHandOracle) {
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    const GaussianParams g = random_gaussian(rng, 12);
    Vector p(12);
    for (double& x : p) x = 2.0 * rng.normal();
    EXPECT_NEAR(gaussian_logpdf(p, g), oracle::gaussian_logpdf_long(p, g.mean, g.diag_var), 1e-12);
  }
}

TEST(GaussianLogpdf, NonPositiveVarianceIsFatal) {
  const GaussianParams g{Vector{0.0}, Vector{0.0}};
  EXPECT_THROW(gaussian_logpdf(Vector{0.0}, g), ContractViolation);
}

TEST(SamplePose, ConcentratesAtVarianceFloor) {
  const GaussianParams g{Vector(12, 1.0), Vector(12, 1e-4)};
  Rng rng(14);
  for (int i = 0; i < 1000; ++i) {
    const Vector p = sample_pose(g, rng);
    for (double x : p) EXPECT_LE(std::abs(x - 1.0), 6.0 * std::sqrt(1e-4));
  }
}

TEST(SamplePose, MonteCarloMean) {
  Rng rng(15);
  const GaussianParams g = random_gaussian(rng, 4);
  const int n = 100000;
  Vector mean(4);
  for (int i = 0; i < n; ++i) mean = mean + sample_pose(g, rng);
  for (std::size_t d = 0; d < 4; ++d) {
    EXPECT_LE(std::abs(mean[d] / n - g.mean[d]), 3.0 * std::sqrt(g.diag_var[d] / n));
  }
}

TEST(SamplePose, FixedSeedReproduces) {
  Rng rng(16);
  const GaussianParams g = random_gaussian(rng, 3);
  Rng a(1);
  Rng b(1);
  EXPECT_EQ(sample_pose(g, a), sample_pose(g, b));
}

TEST(Kl, IdenticalDistributionsAreZero) {
  Rng rng(17);
  const GaussianParams g = random_gaussian(rng, 5);
  EXPECT_EQ(kl_gaussian(g, g), 0.0);
  const Vector logits{0.1, 2.0, -1.0};
  EXPECT_EQ(kl_categorical(logits, logits), 0.0);
  const Policy p(small_config(), 17);
  EXPECT_EQ(kl_discrete(p, p, text_query(), Tokens{2, 1, 0}), 0.0);
}

TEST(Kl, UnitShiftInOneDimension) {
  const GaussianParams a{Vector{0.0}, Vector{1.0}};
  const GaussianParams b{Vector{1.0}, Vector{1.0}};
  EXPECT_DOUBLE_EQ(kl_gaussian(a, b), 0.5);
}

TEST(Kl, ClosedFormMatchesMonteCarlo) {
  Rng rng(18);
  for (int pair = 0; pair < 5; ++pair) {
    const GaussianParams a = random_gaussian(rng, 3);
    GaussianParams b = a;
    for (std::size_t d = 0; d < 3; ++d) {
      b.mean[d] += 0.5 * rng.normal();
      b.diag_var[d] *= 0.5 + rng.uniform();
    }
    double mc = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const Vector x = sample_pose(a, rng);
      mc += gaussian_logpdf(x, a) - gaussian_logpdf(x, b);
    }
    EXPECT_NEAR(mc / n, kl_gaussian(a, b), 0.01);
  }
}

TEST(Kl, NonNegative) {
  Rng rng(19);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_GE(kl_gaussian(random_gaussian(rng, 4), random_gaussian(rng, 4)), -1e-12);
    Vector l1(5);
    Vector l2(5);
    for (std::size_t k = 0; k < 5; ++k) {
      l1[k] = 3.0 * rng.normal();
      l2[k] = 3.0 * rng.normal();
    }
    EXPECT_GE(kl_categorical(l1, l2), -1e-12);
  }
  const Policy a(small_config(), 1);
  const Policy b(small_config(), 2);
  EXPECT_GE(kl_discrete(a, b, text_query(), Tokens{3, 1, 0}), -1e-12);
}

TEST(Sample, PosePresentIffSingleTrigger) {
  const Policy p(small_config(), 20);
  Rng rng(20);
  int with_pose = 0;
  for (int i = 0; i < 500; ++i) {
    const HybridResponse r = p.sample(text_query(), rng);
    const auto triggers = std::count(r.tokens.begin(), r.tokens.end(), 1);
    EXPECT_EQ(r.pose.has_value(), triggers == 1);
    EXPECT_EQ(r.logp_continuous.has_value(), r.pose.has_value());
    with_pose += r.pose ? 1 : 0;
  }
  EXPECT_GT(with_pose, 0);
}

TEST(Sample, TotalLogProbFactorises) {
  const Policy p(small_config(), 21);
  Rng rng(21);
  const Query q = image_query(21);
  int checked = 0;
  for (int i = 0; i < 300; ++i) {
    const HybridResponse r = p.sample(q, rng);
    double expect = p.logp_discrete(q, r.tokens);
    if (r.pose) expect += gaussian_logpdf(*r.pose, p.pose_head(q, r.tokens));
    EXPECT_EQ(r.total_logp(), expect);
    checked += r.pose ? 1 : 0;
  }
  EXPECT_GT(checked, 0);
}

TEST(Sample, DeterministicHeadEmitsMean) {
  PolicyConfig c = small_config();
  c.deterministic_pose = true;
  const Policy p(c, 22);
  Rng rng(22);
  for (int i = 0; i < 300; ++i) {
    const HybridResponse r = p.sample(text_query(), rng);
    if (!r.pose) continue;
    EXPECT_EQ(*r.pose, p.pose_head(text_query(), r.tokens).mean);
    EXPECT_FALSE(r.logp_continuous.has_value());
  }
}

TEST(Policy, FlattenRestoreIsIdentity) {
  const Policy a(small_config(), 23);
  Policy b(small_config(), 24);
  ASSERT_NE(a.flatten(), b.flatten());
  b.restore(a.flatten());
  EXPECT_EQ(b.flatten(), a.flatten());
  const Query q = text_query();
  EXPECT_EQ(b.logp_discrete(q, Tokens{3, 1, 0}), a.logp_discrete(q, Tokens{3, 1, 0}));
  EXPECT_EQ(b.flatten().size(), a.parameter_count());
  std::size_t total = 0;
  for (const auto& block : a.blocks()) {
    EXPECT_EQ(block.offset, total);
    total += block.size;
  }
  EXPECT_EQ(total, a.parameter_count());
}

TEST(Policy, WholeLogDensityGradientMatchesFiniteDifferences) {
  PolicyConfig c = small_config();
  c.embed_dim = 2;
  c.backbone_width = 3;
  c.token_hidden = 3;
  c.pose_hidden = 3;
  const Query q = image_query(25);
  const Tokens a{4, 1, 0};
  const Vector pose{0.3, -0.2, 0.5};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Policy p(c, seed);
    auto value = [&](std::span<const double> theta) {
      Policy local = p;
      local.restore(theta);
      return local.logp_discrete(q, a) + gaussian_logpdf(pose, local.pose_head(q, a));
    };
    GradTape tape(p.parameter_count());
    const PoseVars head = p.pose_head(tape, q, a);
    Var total = tape.add(p.logp_discrete(tape, q, a), tape.gaussian_logpdf(pose, head.mean, head.var));
    EXPECT_NEAR(tape.scalar_value(total), value(p.flatten()), 1e-12);
    const Vector g = tape.backward(total);
    const auto fd = oracle::finite_difference(value, p.flatten());
    EXPECT_LT(oracle::max_relative_error(g, fd), 1e-4);
  }
}

TEST(Snapshot, FreezesReferenceValues) {
  Policy p(small_config(), 26);
  const PolicySnapshot ref = snapshot_reference(p);
  EXPECT_EQ(ref.policy(), snapshot_reference(p).policy());
  const Query q = text_query();
  const Tokens a{2, 1, 0};
  const double before = ref.policy().logp_discrete(q, a);
  Vector theta = p.flatten();
  for (double& v : theta) v += 0.01;
  p.restore(theta);
  EXPECT_EQ(ref.policy().logp_discrete(q, a), before);
  EXPECT_NE(p.logp_discrete(q, a), before);
}

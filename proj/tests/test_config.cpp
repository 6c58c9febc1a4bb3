#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "hygrpo/config.hpp"
#include "hygrpo/error.hpp"

using namespace hygrpo;

namespace {

std::string key_of(std::string_view text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "";
}

}  // namespace

TEST(Config, EmptyTextGivesDefaults) {
  const RunConfig c = parse_config("");
  EXPECT_EQ(dump_config(c), dump_config(RunConfig{}));
  EXPECT_EQ(c.trainer.batch_size, 16u);
  EXPECT_EQ(c.trainer.steps, 1000u);
  EXPECT_EQ(c.trainer.group_size, 8u);
  EXPECT_EQ(c.trainer.clip_epsilon, 0.2);
  EXPECT_EQ(c.trainer.kl_beta, 0.04);
  EXPECT_EQ(c.trainer.adam_beta1, 0.9);
  EXPECT_EQ(c.trainer.adam_beta2, 0.95);
  EXPECT_EQ(c.trainer.lr_schedule, LrSchedule::kCosine);
  EXPECT_EQ(c.reward.delta_joint, 1e-3);
  EXPECT_EQ(c.env.noise_sigma, 0.01);
}

TEST(Config, ParsesValuesAndComments) {
  const RunConfig c = parse_config(
      "; comment\n"
      "[trainer]\n"
      "group_size = 4\n"
      "learning_rate = 1e-6\n"
      "reference = fixed\n"
      "# another\n"
      "[reward]\n"
      "map.text2pose = none\n"
      "[run]\n"
      "seed = 0x10\n");
  EXPECT_EQ(c.trainer.group_size, 4u);
  EXPECT_EQ(c.trainer.learning_rate, 1e-6);
  EXPECT_EQ(c.trainer.reference, ReferenceMode::kFixed);
  EXPECT_EQ(c.reward.map[0], ContinuousReward::kNone);
  EXPECT_EQ(c.seed, 16u);
}

TEST(Config, UnknownKeyIsNamed) {
  EXPECT_EQ(key_of("[trainer]\nfoo = 1\n"), "trainer.foo");
  EXPECT_EQ(key_of("[bogus]\nseed = 1\n"), "bogus.seed");
}

TEST(Config, InvalidValueIsNamed) {
  EXPECT_EQ(key_of("[trainer]\ngroup_size = many\n"), "trainer.group_size");
  EXPECT_EQ(key_of("[trainer]\nlearning_rate = 1e-3x\n"), "trainer.learning_rate");
  EXPECT_EQ(key_of("[trainer]\nobjective = both\n"), "trainer.objective");
  EXPECT_EQ(key_of("[policy]\ndeterministic_pose = yes\n"), "policy.deterministic_pose");
}

TEST(Config, ValidationFailureIsNamed) {
  EXPECT_EQ(key_of("[trainer]\ngroup_size = 1\n"), "trainer.group_size");
  EXPECT_EQ(key_of("[trainer]\nclip_epsilon = 1.5\n"), "trainer.clip_epsilon");
  EXPECT_EQ(key_of("[reward]\ndelta_joint = 0\n"), "reward.delta_joint");
  EXPECT_EQ(key_of("[reward]\nmap.qa = joint\n"), "reward.map.qa");
  EXPECT_EQ(key_of("[env]\nimage_dim = 4\n"), "env.image_dim");
}

TEST(Config, DumpRoundTrips) {
  RunConfig c;
  c.trainer.learning_rate = 0.1 + 0.2;
  c.env.noise_sigma = 1.0 / 3.0;
  c.trainer.objective = Objective::kDiscreteOnly;
  c.policy.deterministic_pose = true;
  c.out_dir = "some/where";
  const std::string text = dump_config(c);
  const RunConfig back = parse_config(text);
  EXPECT_EQ(dump_config(back), text);
  EXPECT_EQ(back.trainer.learning_rate, 0.1 + 0.2);
  EXPECT_EQ(back.env.noise_sigma, 1.0 / 3.0);
}

TEST(Config, HashIgnoresOutputDirectoryOnly) {
  RunConfig a;
  RunConfig b;
  b.out_dir = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed = 2;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, EveryKeyDocumentedAndUnique) {
  std::set<std::string> names;
  for (const auto& k : config_keys()) {
    EXPECT_FALSE(k.description.empty()) << k.full_name();
    EXPECT_TRUE(names.insert(k.full_name()).second) << k.full_name();
    EXPECT_FALSE(k.get(RunConfig{}).empty()) << k.full_name();
  }
  for (const char* required :
       {"run.seed", "run.out_dir", "trainer.group_size", "trainer.clip_epsilon",
        "trainer.kl_beta", "trainer.std_epsilon", "trainer.learning_rate",
        "trainer.adam_beta1", "trainer.adam_beta2", "trainer.lr_schedule",
        "trainer.batch_size", "trainer.steps", "trainer.reference", "reward.delta_joint",
        "reward.w_text", "reward.map.text2pose", "reward.map.image2pose", "reward.map.qa",
        "env.noise_sigma", "env.n_joints", "env.mix_text2pose", "env.mix_image2pose",
        "env.mix_qa", "policy.var_floor"}) {
    EXPECT_TRUE(names.count(required)) << required;
  }
}

TEST(Config, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Config, ShippedConfigsLoad) {
  const std::filesystem::path dir = HYGRPO_CONFIG_DIR;
  EXPECT_EQ(dump_config(load_config(dir / "default.cfg")), dump_config(RunConfig{}));
  EXPECT_DOUBLE_EQ(load_config(dir / "low_lr.cfg").trainer.learning_rate, 1e-6);
  EXPECT_NO_THROW(load_config(dir / "small.cfg"));
}

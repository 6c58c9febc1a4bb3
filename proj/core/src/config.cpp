#include "hygrpo/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "hygrpo/error.hpp"
#include "hygrpo/vocab.hpp"

namespace hygrpo {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ContractViolation("expected a number, got '" + std::string(s) + "'");
  }
  return v;
}

std::uint64_t parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  int base = 10;
  if (s.starts_with("0x") || s.starts_with("0X")) {
    s.remove_prefix(2);
    base = 16;
  }
  auto res = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ContractViolation("expected a non-negative integer, got '" + std::string(s) + "'");
  }
  return v;
}

bool parse_bool(std::string_view s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw ContractViolation("expected true or false, got '" + std::string(s) + "'");
}

template <typename T>
ConfigKey size_key(std::string section, std::string name, std::string doc, T RunConfig::*part,
                   std::size_t T::*field) {
  return {std::move(section), std::move(name), std::move(doc),
          [=](const RunConfig& c) { return std::to_string((c.*part).*field); },
          [=](RunConfig& c, std::string_view v) {
            (c.*part).*field = static_cast<std::size_t>(parse_u64(v));
          }};
}

template <typename T>
ConfigKey double_key(std::string section, std::string name, std::string doc, T RunConfig::*part,
                     double T::*field) {
  return {std::move(section), std::move(name), std::move(doc),
          [=](const RunConfig& c) { return format_double((c.*part).*field); },
          [=](RunConfig& c, std::string_view v) { (c.*part).*field = parse_double(v); }};
}

template <typename T>
ConfigKey u64_key(std::string section, std::string name, std::string doc, T RunConfig::*part,
                  std::uint64_t T::*field) {
  return {std::move(section), std::move(name), std::move(doc),
          [=](const RunConfig& c) { return std::to_string((c.*part).*field); },
          [=](RunConfig& c, std::string_view v) { (c.*part).*field = parse_u64(v); }};
}

std::vector<ConfigKey> make_keys() {
  using R = RunConfig;
  std::vector<ConfigKey> k;
  k.push_back({"run", "seed", "Master seed for initialisation, batches and sampling.",
               [](const R& c) { return std::to_string(c.seed); },
               [](R& c, std::string_view v) { c.seed = parse_u64(v); }});
  k.push_back({"run", "out_dir", "Output directory for metrics, checkpoints and summaries.",
               [](const R& c) { return c.out_dir.string(); },
               [](R& c, std::string_view v) { c.out_dir = std::string(v); }});
  k.push_back({"run", "checkpoint_every", "Checkpoint period in steps; 0 keeps only the last.",
               [](const R& c) { return std::to_string(c.checkpoint_every); },
               [](R& c, std::string_view v) { c.checkpoint_every = parse_u64(v); }});

  k.push_back(size_key("trainer", "group_size", "Candidates G sampled per query.", &R::trainer,
                       &TrainerConfig::group_size));
  k.push_back(double_key("trainer", "clip_epsilon", "Ratio clip range of the discrete term.",
                         &R::trainer, &TrainerConfig::clip_epsilon));
  k.push_back(double_key("trainer", "clip_epsilon_continuous",
                         "Ratio clip range of the continuous term.", &R::trainer,
                         &TrainerConfig::clip_epsilon_continuous));
  k.push_back(double_key("trainer", "kl_beta", "KL weight of the token branch.", &R::trainer,
                         &TrainerConfig::kl_beta));
  k.push_back(double_key("trainer", "kl_beta_continuous", "KL weight of the pose branch.",
                         &R::trainer, &TrainerConfig::kl_beta_continuous));
  k.push_back(double_key("trainer", "std_epsilon", "Zero-variance guard of group z-scores.",
                         &R::trainer, &TrainerConfig::std_epsilon));
  k.push_back(double_key("trainer", "learning_rate", "Peak Adam learning rate.", &R::trainer,
                         &TrainerConfig::learning_rate));
  k.push_back(double_key("trainer", "adam_beta1", "Adam first-moment decay.", &R::trainer,
                         &TrainerConfig::adam_beta1));
  k.push_back(double_key("trainer", "adam_beta2", "Adam second-moment decay.", &R::trainer,
                         &TrainerConfig::adam_beta2));
  k.push_back(double_key("trainer", "adam_epsilon", "Adam denominator offset.", &R::trainer,
                         &TrainerConfig::adam_epsilon));
  k.push_back(double_key("trainer", "weight_decay", "Decoupled weight decay.", &R::trainer,
                         &TrainerConfig::weight_decay));
  k.push_back({"trainer", "lr_schedule", "cosine or constant.",
               [](const R& c) { return std::string(to_string(c.trainer.lr_schedule)); },
               [](R& c, std::string_view v) { c.trainer.lr_schedule = parse_lr_schedule(v); }});
  k.push_back(size_key("trainer", "batch_size", "Queries per step.", &R::trainer,
                       &TrainerConfig::batch_size));
  k.push_back(size_key("trainer", "steps", "Training iterations N.", &R::trainer,
                       &TrainerConfig::steps));
  k.push_back({"trainer", "reference",
               "refresh (snapshot every step) or fixed (the initial policy).",
               [](const R& c) { return std::string(to_string(c.trainer.reference)); },
               [](R& c, std::string_view v) { c.trainer.reference = parse_reference_mode(v); }});
  k.push_back({"trainer", "objective", "hybrid or discrete_only.",
               [](const R& c) { return std::string(to_string(c.trainer.objective)); },
               [](R& c, std::string_view v) { c.trainer.objective = parse_objective(v); }});
  k.push_back(size_key("trainer", "threads", "Worker threads for group sampling.", &R::trainer,
                       &TrainerConfig::threads));

  k.push_back(size_key("pretrain", "steps", "Supervised warm-start steps; 0 disables.",
                       &R::pretrain, &PretrainConfig::steps));
  k.push_back(size_key("pretrain", "pose_steps", "Final warm-start steps that include the pose loss.",
                       &R::pretrain, &PretrainConfig::pose_steps));
  k.push_back(size_key("pretrain", "batch_size", "Warm-start batch size.", &R::pretrain,
                       &PretrainConfig::batch_size));
  k.push_back(double_key("pretrain", "learning_rate", "Warm-start Adam learning rate.",
                         &R::pretrain, &PretrainConfig::learning_rate));
  k.push_back(double_key("pretrain", "pose_weight", "Weight of the pose loss.", &R::pretrain,
                         &PretrainConfig::pose_weight));

  k.push_back(size_key("policy", "embed_dim", "Token embedding width.", &R::policy,
                       &PolicyShape::embed_dim));
  k.push_back(size_key("policy", "backbone_width", "Shared backbone output width.", &R::policy,
                       &PolicyShape::backbone_width));
  k.push_back(size_key("policy", "token_hidden", "Hidden width of the token head.", &R::policy,
                       &PolicyShape::token_hidden));
  k.push_back(size_key("policy", "pose_hidden", "Hidden width of the pose head.", &R::policy,
                       &PolicyShape::pose_hidden));
  k.push_back(size_key("policy", "max_len", "Maximum response length in tokens.", &R::policy,
                       &PolicyShape::max_len));
  k.push_back(double_key("policy", "var_floor", "Lower bound added to the pose variance.",
                         &R::policy, &PolicyShape::var_floor));
  k.push_back({"policy", "deterministic_pose", "Emit the pose mean without a density.",
               [](const R& c) { return std::string(c.policy.deterministic_pose ? "true" : "false"); },
               [](R& c, std::string_view v) { c.policy.deterministic_pose = parse_bool(v); }});

  k.push_back(double_key("reward", "delta_joint", "Offset of the inverse joint error.",
                         &R::reward, &RewardConfig::delta_joint));
  k.push_back(double_key("reward", "w_text", "Weight of text similarity in the qa reward.",
                         &R::reward, &RewardConfig::w_text));
  for (TaskKind kind : kAllTasks) {
    const auto i = static_cast<std::size_t>(kind);
    k.push_back({"reward", "map." + std::string(to_string(kind)),
                 "Continuous reward for this task: semantic, joint or none.",
                 [i](const R& c) { return std::string(to_string(c.reward.map[i])); },
                 [i](R& c, std::string_view v) { c.reward.map[i] = parse_continuous_reward(v); }});
  }

  k.push_back(size_key("env", "n_joints", "Joints of the kinematic chain.", &R::env,
                       &EnvConfig::n_joints));
  k.push_back(size_key("env", "image_dim", "Image feature width.", &R::env,
                       &EnvConfig::image_dim));
  k.push_back(size_key("env", "coarse_dim", "Coarse visual encoder width.", &R::env,
                       &EnvConfig::coarse_dim));
  k.push_back(size_key("env", "fine_dim", "Fine visual encoder width.", &R::env,
                       &EnvConfig::fine_dim));
  k.push_back(size_key("env", "retrieval_dim", "Shared text/pose retrieval embedding width.",
                       &R::env, &EnvConfig::retrieval_dim));
  k.push_back(double_key("env", "noise_sigma", "Image channel noise.", &R::env,
                         &EnvConfig::noise_sigma));
  k.push_back(double_key("env", "pose_std", "Std of image2pose ground-truth poses.", &R::env,
                         &EnvConfig::pose_std));
  k.push_back(double_key("env", "planted_pose_norm", "Norm of planted text2pose poses.",
                         &R::env, &EnvConfig::planted_pose_norm));
  k.push_back(size_key("env", "descriptors_per_prompt", "Descriptor words per text2pose prompt.",
                       &R::env, &EnvConfig::descriptors_per_prompt));
  for (TaskKind kind : kAllTasks) {
    const auto i = static_cast<std::size_t>(kind);
    k.push_back({"env", "mix_" + std::string(to_string(kind)), "Relative share of this task.",
                 [i](const R& c) { return format_double(c.env.mix[i]); },
                 [i](R& c, std::string_view v) { c.env.mix[i] = parse_double(v); }});
  }
  k.push_back(size_key("env", "eval_size", "Evaluation instances per task.", &R::env,
                       &EnvConfig::eval_size));
  k.push_back(u64_key("env", "world_seed", "Seed of the frozen encoders and image channel.",
                      &R::env, &EnvConfig::world_seed));

  k.push_back(size_key("ablation", "seeds", "Seeds per ablation variant.", &R::ablation,
                       &AblationConfig::seeds));
  k.push_back(u64_key("ablation", "first_seed", "First ablation seed; seeds are consecutive.",
                      &R::ablation, &AblationConfig::first_seed));
  k.push_back(size_key("ablation", "eval_group_size", "Responses per evaluation instance.",
                       &R::ablation, &AblationConfig::eval_group_size));
  k.push_back(u64_key("ablation", "eval_seed", "Seed of evaluation sets and sampling.",
                      &R::ablation, &AblationConfig::eval_seed));
  return k;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = make_keys();
  return keys;
}

PolicyConfig RunConfig::policy_config() const {
  const Vocabulary& vocab = Vocabulary::standard();
  PolicyConfig p;
  p.vocab_size = vocab.size();
  p.end_token = vocab.end_token();
  p.pose_token = vocab.pose_token();
  p.embed_dim = policy.embed_dim;
  p.backbone_width = policy.backbone_width;
  p.token_hidden = policy.token_hidden;
  p.pose_hidden = policy.pose_hidden;
  p.pose_dim = 3 * env.n_joints;
  p.image_dim = env.image_dim;
  p.coarse_dim = env.coarse_dim;
  p.fine_dim = env.fine_dim;
  p.max_len = policy.max_len;
  p.var_floor = policy.var_floor;
  p.deterministic_pose = policy.deterministic_pose;
  return p;
}

void RunConfig::validate() const {
  trainer.validate();
  pretrain.validate();
  if (pretrain.pose_steps > pretrain.steps) {
    throw ConfigError("pretrain.pose_steps", "must not exceed pretrain.steps");
  }
  if (policy.embed_dim == 0) throw ConfigError("policy.embed_dim", "must be positive");
  if (policy.backbone_width == 0) throw ConfigError("policy.backbone_width", "must be positive");
  if (policy.token_hidden == 0) throw ConfigError("policy.token_hidden", "must be positive");
  if (policy.pose_hidden == 0) throw ConfigError("policy.pose_hidden", "must be positive");
  if (policy.max_len == 0) throw ConfigError("policy.max_len", "must be positive");
  if (!(policy.var_floor > 0.0)) throw ConfigError("policy.var_floor", "must be positive");
  if (!(reward.delta_joint > 0.0)) throw ConfigError("reward.delta_joint", "must be positive");
  if (!(reward.w_text >= 0.0)) throw ConfigError("reward.w_text", "must be non-negative");
  if (reward.map[static_cast<std::size_t>(TaskKind::kText2Pose)] == ContinuousReward::kJoint) {
    throw ConfigError("reward.map.text2pose", "text2pose has no ground-truth joints");
  }
  if (reward.map[static_cast<std::size_t>(TaskKind::kImage2Pose)] ==
      ContinuousReward::kSemantic) {
    throw ConfigError("reward.map.image2pose", "image2pose has no text prompt");
  }
  if (reward.map[static_cast<std::size_t>(TaskKind::kQa)] != ContinuousReward::kNone) {
    throw ConfigError("reward.map.qa", "qa has no ground-truth pose");
  }
  if (env.n_joints == 0) throw ConfigError("env.n_joints", "must be positive");
  if (env.image_dim < 3 * env.n_joints) {
    throw ConfigError("env.image_dim", "must be at least 3 * n_joints for an injective channel");
  }
  if (env.coarse_dim == 0) throw ConfigError("env.coarse_dim", "must be positive");
  if (env.fine_dim == 0) throw ConfigError("env.fine_dim", "must be positive");
  if (env.retrieval_dim < 3 * env.n_joints) {
    throw ConfigError("env.retrieval_dim", "must be at least 3 * n_joints");
  }
  if (!(env.noise_sigma >= 0.0)) throw ConfigError("env.noise_sigma", "must be non-negative");
  if (!(env.pose_std > 0.0)) throw ConfigError("env.pose_std", "must be positive");
  if (!(env.planted_pose_norm > 0.0)) {
    throw ConfigError("env.planted_pose_norm", "must be positive");
  }
  if (env.descriptors_per_prompt == 0 ||
      env.descriptors_per_prompt > descriptor_words().size()) {
    throw ConfigError("env.descriptors_per_prompt", "must lie in [1, 16]");
  }
  double mix_total = 0.0;
  for (TaskKind kind : kAllTasks) {
    const double m = env.mix[static_cast<std::size_t>(kind)];
    if (!(m >= 0.0)) {
      throw ConfigError("env.mix_" + std::string(to_string(kind)), "must be non-negative");
    }
    mix_total += m;
  }
  if (!(mix_total > 0.0)) throw ConfigError("env.mix_text2pose", "task mix sums to zero");
  if (env.eval_size == 0) throw ConfigError("env.eval_size", "must be positive");
  if (ablation.seeds == 0) throw ConfigError("ablation.seeds", "must be positive");
  if (ablation.eval_group_size == 0) {
    throw ConfigError("ablation.eval_group_size", "must be positive");
  }
}

RunConfig parse_config(std::string_view text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()), e.message());
  }
  std::map<std::string, const ConfigKey*, std::less<>> index;
  for (const auto& key : config_keys()) index[key.full_name()] = &key;

  RunConfig config;
  for (const auto& [section, entries] : tree) {
    if (entries.empty() && !entries.data().empty()) {
      throw ConfigError(section, "key outside of any section");
    }
    for (const auto& [name, value] : entries) {
      const std::string full = section + "." + name;
      auto it = index.find(full);
      if (it == index.end()) throw ConfigError(full, "unknown key");
      try {
        it->second->set(config, value.data());
      } catch (const Error& e) {
        throw ConfigError(full, "invalid value '" + value.data() + "'");
      }
    }
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string dump_config(const RunConfig& config) {
  std::string out;
  std::string section;
  for (const auto& key : config_keys()) {
    if (key.section != section) {
      if (!section.empty()) out += "\n";
      section = key.section;
      out += "[" + section + "]\n";
    }
    out += key.name + " = " + key.get(config) + "\n";
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t config_hash(const RunConfig& config) {
  RunConfig copy = config;
  copy.out_dir.clear();
  return fnv1a64(dump_config(copy));
}

}  // namespace hygrpo

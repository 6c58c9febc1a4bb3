#include "hygrpo/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "hygrpo/error.hpp"

namespace hygrpo {

std::vector<QaPair> qa_bank(const Vocabulary& vocab) {
  const auto questions = question_words();
  const auto answers = answer_words();
  std::vector<QaPair> bank;
  for (std::size_t k = 0; k < 16; ++k) {
    const std::size_t i = k % 8;
    const std::size_t j = (i + 1 + k / 8) % 8;
    const std::size_t a = (i + 3 * (k / 8)) % 8;
    QaPair pair;
    pair.question = {vocab.id("question"), vocab.id(questions[i]), vocab.id(questions[j])};
    pair.answer = vocab.tokenize("The person is " + std::string(answers[a]) + ".");
    bank.push_back(std::move(pair));
  }
  return bank;
}

ImageChannel::ImageChannel(std::size_t joint_dim, std::size_t image_dim,
                           std::uint64_t seed)
    : a_(image_dim, joint_dim) {
  Rng rng(seed);
  const double s = 1.0 / std::sqrt(static_cast<double>(joint_dim));
  for (double& v : a_.span()) v = s * rng.normal();
  if (column_rank(a_) != joint_dim) {
    throw ContractViolation("image channel matrix is not injective");
  }
}

Vector ImageChannel::observe(std::span<const double> joints, double sigma, Rng& rng) const {
  Vector x = matvec(a_, joints);
  if (sigma > 0.0) {
    for (double& v : x) v += sigma * rng.normal();
  }
  return x;
}

TaskGenerator::TaskGenerator(EnvConfig config, const Vocabulary& vocab)
    : config_(config),
      vocab_(vocab),
      chain_(config.n_joints),
      encoders_(vocab.size(), 3 * config.n_joints, config.retrieval_dim,
                config.planted_pose_norm, stream_seed({config.world_seed, 11})),
      channel_(3 * config.n_joints, config.image_dim, stream_seed({config.world_seed, 12})),
      qa_(qa_bank(vocab)) {
  if (config.descriptors_per_prompt == 0 ||
      config.descriptors_per_prompt > descriptor_words().size()) {
    throw ConfigError("env.descriptors_per_prompt", "out of range");
  }
}

TaskInstance TaskGenerator::generate(TaskKind kind, Rng& rng) const {
  TaskInstance task;
  task.query.task = kind;
  switch (kind) {
    case TaskKind::kText2Pose: {
      std::vector<std::size_t> pool(descriptor_words().size());
      std::iota(pool.begin(), pool.end(), 0);
      task.query.prompt_tokens.push_back(vocab_.id("generate"));
      for (std::size_t k = 0; k < config_.descriptors_per_prompt; ++k) {
        const std::size_t pick = k + rng.index(pool.size() - k);
        std::swap(pool[k], pool[pick]);
        task.query.prompt_tokens.push_back(vocab_.id(descriptor_words()[pool[k]]));
      }
      task.gt_pose = encoders_.planted_pose(task.query.prompt_tokens);
      task.planted = true;
      break;
    }
    case TaskKind::kImage2Pose: {
      Vector pose(chain_.pose_dim());
      for (double& v : pose) v = config_.pose_std * rng.normal();
      task.query.prompt_tokens = {vocab_.id("estimate"), vocab_.id("pose"), vocab_.id("image")};
      task.query.image_features =
          channel_.observe(chain_.joints_flat(pose), config_.noise_sigma, rng);
      task.gt_pose = std::move(pose);
      break;
    }
    case TaskKind::kQa: {
      const QaPair& pair = qa_[rng.index(qa_.size())];
      task.query.prompt_tokens = pair.question;
      task.gt_answer = pair.answer;
      break;
    }
  }
  return task;
}

std::array<std::size_t, 3> TaskGenerator::batch_counts(std::size_t batch_size) const {
  const double total = config_.mix[0] + config_.mix[1] + config_.mix[2];
  if (!(total > 0.0)) throw ConfigError("env.mix", "weights must not all be zero");
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double exact = static_cast<double>(batch_size) * config_.mix[k] / total;
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    remainder[k] = exact - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  while (assigned < batch_size) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < 3; ++k) {
      if (remainder[k] > remainder[best]) best = k;
    }
    ++counts[best];
    remainder[best] = -1.0;
    ++assigned;
  }
  return counts;
}

std::vector<TaskInstance> TaskGenerator::batch(std::size_t batch_size, Rng& rng) const {
  const auto counts = batch_counts(batch_size);
  std::vector<TaskInstance> out;
  out.reserve(batch_size);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < counts[k]; ++i) out.push_back(generate(kAllTasks[k], rng));
  }
  return out;
}

std::vector<TaskInstance> TaskGenerator::eval_set(std::uint64_t seed) const {
  Rng rng = make_rng(StreamTag::kEvalTasks, {seed});
  std::vector<TaskInstance> out;
  for (TaskKind kind : kAllTasks) {
    for (std::size_t i = 0; i < config_.eval_size; ++i) out.push_back(generate(kind, rng));
  }
  return out;
}

std::string task_to_json(const TaskInstance& task, const Vocabulary& vocab) {
  nlohmann::ordered_json j;
  j["task"] = std::string(to_string(task.query.task));
  j["prompt"] = vocab.detokenize(task.query.prompt_tokens);
  j["prompt_tokens"] = task.query.prompt_tokens;
  if (task.query.image_features) j["image_features"] = task.query.image_features->values();
  if (task.gt_pose) j["gt_pose"] = task.gt_pose->values();
  if (task.gt_answer) j["gt_answer"] = vocab.detokenize(*task.gt_answer);
  j["planted"] = task.planted;
  return j.dump();
}

void export_tasks(const std::filesystem::path& path,
                  const std::vector<TaskInstance>& tasks, const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& t : tasks) out << task_to_json(t, vocab) << '\n';
}

}  // namespace hygrpo

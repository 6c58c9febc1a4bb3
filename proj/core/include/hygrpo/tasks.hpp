#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hygrpo/encoders.hpp"
#include "hygrpo/kinematics.hpp"
#include "hygrpo/rng.hpp"
#include "hygrpo/types.hpp"
#include "hygrpo/vocab.hpp"

namespace hygrpo {

struct EnvConfig {
  std::size_t n_joints = 4;
  std::size_t image_dim = 16;
  std::size_t coarse_dim = 4;
  std::size_t fine_dim = 12;
  std::size_t retrieval_dim = 16;
  double noise_sigma = 0.01;
  // Per-coordinate std of image2pose ground-truth poses.
  double pose_std = 0.5;
  double planted_pose_norm = 1.5;
  std::size_t descriptors_per_prompt = 3;
  // Task mix weights, indexed like kAllTasks.
  std::array<double, 3> mix = {0.375, 0.375, 0.25};
  std::size_t eval_size = 32;
  // Seeds every frozen map of the environment (encoders, image channel).
  std::uint64_t world_seed = 0x5eedULL;
};

struct TaskInstance {
  Query query;
  std::optional<Vector> gt_pose;
  std::optional<Tokens> gt_answer;
  // text2pose: gt_pose is the planted maximizer of the semantic reward.
  bool planted = false;
};

struct QaPair {
  Tokens question;
  Tokens answer;
};

// The 16 fixed question/answer pairs.
std::vector<QaPair> qa_bank(const Vocabulary& vocab);

// image = A * joints + sigma * noise with A (image_dim x 3 n_joints) of full
// column rank, so the noiseless channel is injective.
class ImageChannel {
 public:
  ImageChannel(std::size_t joint_dim, std::size_t image_dim, std::uint64_t seed);

  const Matrix& matrix() const { return a_; }
  Vector observe(std::span<const double> joints, double sigma, Rng& rng) const;

 private:
  Matrix a_;
};

class TaskGenerator {
 public:
  TaskGenerator(EnvConfig config, const Vocabulary& vocab);

  const EnvConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  const KinematicChain& chain() const { return chain_; }
  const RetrievalEncoders& encoders() const { return encoders_; }
  const ImageChannel& channel() const { return channel_; }

  TaskInstance generate(TaskKind kind, Rng& rng) const;
  // Per-task counts from the mix by largest remainder; tasks are emitted
  // grouped in kAllTasks order.
  std::array<std::size_t, 3> batch_counts(std::size_t batch_size) const;
  std::vector<TaskInstance> batch(std::size_t batch_size, Rng& rng) const;
  // eval_size instances of every task kind.
  std::vector<TaskInstance> eval_set(std::uint64_t seed) const;

 private:
  EnvConfig config_;
  const Vocabulary& vocab_;
  KinematicChain chain_;
  RetrievalEncoders encoders_;
  ImageChannel channel_;
  std::vector<QaPair> qa_;
};

std::string task_to_json(const TaskInstance& task, const Vocabulary& vocab);
// One JSON record per line.
void export_tasks(const std::filesystem::path& path,
                  const std::vector<TaskInstance>& tasks, const Vocabulary& vocab);

}  // namespace hygrpo

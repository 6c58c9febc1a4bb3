#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hygrpo/fusion.hpp"
#include "hygrpo/math.hpp"
#include "hygrpo/mlp.hpp"
#include "hygrpo/rng.hpp"
#include "hygrpo/tape.hpp"
#include "hygrpo/types.hpp"

namespace hygrpo {

struct PolicyConfig {
  std::size_t vocab_size = 46;
  TokenId end_token = 0;
  std::optional<TokenId> pose_token = 1;
  std::size_t embed_dim = 8;
  std::size_t backbone_width = 32;
  std::size_t token_hidden = 32;
  std::size_t pose_hidden = 32;
  std::size_t pose_dim = 12;
  // 0 disables the visual branch.
  std::size_t image_dim = 16;
  std::size_t coarse_dim = 4;
  std::size_t fine_dim = 12;
  std::size_t max_len = 16;
  double var_floor = 1e-4;
  // Regression baseline: the emitted pose is the head mean, no density.
  bool deterministic_pose = false;

  bool operator==(const PolicyConfig&) const = default;
};

// Diagonal Gaussian N(mean, diag(diag_var)).
struct GaussianParams {
  Vector mean;
  Vector diag_var;
};

struct ParameterBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;

  bool operator==(const ParameterBlock&) const = default;
};

struct DiscreteSample {
  Tokens tokens;
  double logp = 0.0;
  bool truncated = false;
  // Logits at every sampled position, in order.
  std::vector<Vector> step_logits;
};

// Pose-head outputs recorded on a tape.
struct PoseVars {
  Var mean;
  Var var;
};

// pi(a, p | q) = pi(a | q) * N(p; mu(q, a), diag(v(q, a))).
//
// State for a prefix a_<t is backbone([mean prompt embedding, W_a f_a(x),
// W_b f_b(x), mean prefix embedding, t / max_len]); the visual slots are zero
// for queries without image features. The token head reads that state; the
// pose head reads the state of the full response.
class Policy {
 public:
  Policy(PolicyConfig config, std::uint64_t init_seed,
         std::uint64_t encoder_seed = 0x5eedULL);

  const PolicyConfig& config() const { return config_; }

  std::size_t parameter_count() const;
  // Blocks in flat order: embedding, fusion_coarse, fusion_fine, backbone,
  // token_head, pose_trunk, pose_mean, pose_var.
  const std::vector<ParameterBlock>& blocks() const { return blocks_; }
  const ParameterBlock& block(std::string_view name) const;

  Vector flatten() const;
  void restore(std::span<const double> flat);

  Vector encode_state(const Query& q, std::span<const TokenId> prefix) const;
  Vector token_logits(const Query& q, std::span<const TokenId> prefix) const;

  // Autoregressive draw until END or max_len.
  DiscreteSample sample_discrete(const Query& q, Rng& rng) const;
  double logp_discrete(const Query& q, std::span<const TokenId> tokens) const;
  std::vector<Vector> step_logits(const Query& q,
                                  std::span<const TokenId> tokens) const;

  // Throws ContractViolation when `tokens` lacks the POSE trigger.
  GaussianParams pose_head(const Query& q, std::span<const TokenId> tokens) const;

  // Discrete draw, then a pose iff the trigger occurs exactly once.
  HybridResponse sample(const Query& q, Rng& rng) const;

  // Taped counterparts. `step_logits`, when given, receives the logits Var
  // of each position.
  Var logp_discrete(GradTape& tape, const Query& q, std::span<const TokenId> tokens,
                    std::vector<Var>* step_logits = nullptr) const;
  PoseVars pose_head(GradTape& tape, const Query& q,
                     std::span<const TokenId> tokens) const;

  bool emits_pose(std::span<const TokenId> tokens) const;

  Mlp& backbone() { return backbone_; }
  Mlp& token_head() { return token_head_; }
  Mlp& pose_trunk() { return pose_trunk_; }
  Mlp& pose_mean_head() { return pose_mean_; }
  Mlp& pose_var_head() { return pose_var_; }
  DualFusion& fusion() { return fusion_; }
  Matrix& embedding() { return embedding_; }

  bool operator==(const Policy&) const = default;

 private:
  struct Context {
    Vector prompt_mean;
    Vector coarse;
    Vector fine;
  };
  struct TapedContext {
    Var prompt_mean;
    Var coarse;
    Var fine;
  };

  Context context(const Query& q) const;
  Vector state(const Context& ctx, std::span<const TokenId> prefix) const;
  TapedContext context(GradTape& tape, const Query& q) const;
  Var state(GradTape& tape, const TapedContext& ctx, std::span<const Var> prefix,
            std::size_t prefix_len) const;
  Var embed(GradTape& tape, TokenId t) const;
  GaussianParams pose_from_state(const Vector& s) const;
  void check_token(TokenId t) const;

  PolicyConfig config_;
  Matrix embedding_;  // vocab x embed_dim
  DualFusion fusion_;
  Mlp backbone_;
  Mlp token_head_;
  Mlp pose_trunk_;
  Mlp pose_mean_;
  Mlp pose_var_;
  std::vector<ParameterBlock> blocks_;
};

// Frozen copy of a policy used for importance ratios and KL.
class PolicySnapshot {
 public:
  explicit PolicySnapshot(const Policy& policy) : policy_(policy) {}
  const Policy& policy() const { return policy_; }

 private:
  Policy policy_;
};

PolicySnapshot snapshot_reference(const Policy& policy);

// -1/2 sum_d [ln(2 pi v_d) + (p_d - mu_d)^2 / v_d].
double gaussian_logpdf(std::span<const double> p, const GaussianParams& g);
// mu + sqrt(v) * z, z ~ N(0, I).
Vector sample_pose(const GaussianParams& g, Rng& rng);
// KL(g || ref) for diagonal Gaussians.
double kl_gaussian(const GaussianParams& g, const GaussianParams& ref);
double kl_categorical(std::span<const double> logits,
                      std::span<const double> ref_logits);
// Per-position categorical KL summed over the positions of `tokens`.
double kl_discrete(const Policy& policy, const Policy& ref, const Query& q,
                   std::span<const TokenId> tokens);

}  // namespace hygrpo

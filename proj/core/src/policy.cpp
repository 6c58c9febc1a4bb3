#include "hygrpo/policy.hpp"

#include <algorithm>
#include <numbers>

namespace hygrpo {

namespace {

enum Component : std::uint64_t {
  kEmbeddingSeed = 1, kFusionSeed, kBackboneSeed, kTokenSeed, kTrunkSeed,
  kMeanSeed, kVarSeed,
};

}  // namespace

Policy::Policy(PolicyConfig config, std::uint64_t init_seed,
               std::uint64_t encoder_seed)
    : config_(std::move(config)) {
  const auto& c = config_;
  if (c.vocab_size == 0) throw ContractViolation("policy: empty vocabulary");
  check_token(c.end_token);
  if (c.pose_token) check_token(*c.pose_token);
  if (c.max_len == 0) throw ContractViolation("policy: max_len must be positive");
  if (!(c.var_floor > 0.0)) throw ContractViolation("policy: var_floor must be positive");

  embedding_ = Matrix(c.vocab_size, c.embed_dim);
  {
    Rng rng(stream_seed({init_seed, kEmbeddingSeed}));
    for (double& v : embedding_.span()) v = rng.uniform(-1.0, 1.0);
  }
  fusion_ = DualFusion(c.image_dim, c.coarse_dim, c.fine_dim, c.embed_dim, encoder_seed,
                       stream_seed({init_seed, kFusionSeed}));
  const std::size_t visual = c.image_dim > 0 ? 2 * c.embed_dim : 0;
  const std::size_t input = 2 * c.embed_dim + visual + 1;
  const LayerSpec backbone[] = {{c.backbone_width, Activation::kTanh}};
  backbone_ = Mlp(input, backbone, stream_seed({init_seed, kBackboneSeed}));
  const LayerSpec token[] = {{c.token_hidden, Activation::kTanh},
                             {c.vocab_size, Activation::kIdentity}};
  token_head_ = Mlp(c.backbone_width, token, stream_seed({init_seed, kTokenSeed}));
  const LayerSpec trunk[] = {{c.pose_hidden, Activation::kTanh}};
  pose_trunk_ = Mlp(c.backbone_width, trunk, stream_seed({init_seed, kTrunkSeed}));
  const LayerSpec mean[] = {{c.pose_dim, Activation::kIdentity}};
  pose_mean_ = Mlp(c.pose_hidden, mean, stream_seed({init_seed, kMeanSeed}));
  const LayerSpec var[] = {{c.pose_dim, Activation::kSoftplus}};
  pose_var_ = Mlp(c.pose_hidden, var, stream_seed({init_seed, kVarSeed}));

  std::size_t offset = 0;
  auto add_block = [&](std::string name, std::size_t size) {
    blocks_.push_back({std::move(name), offset, size});
    offset += size;
  };
  add_block("embedding", embedding_.size());
  add_block("fusion_coarse", fusion_.coarse_projection().size());
  add_block("fusion_fine", fusion_.fine_projection().size());
  add_block("backbone", backbone_.parameter_count());
  add_block("token_head", token_head_.parameter_count());
  add_block("pose_trunk", pose_trunk_.parameter_count());
  add_block("pose_mean", pose_mean_.parameter_count());
  add_block("pose_var", pose_var_.parameter_count());
}

void Policy::check_token(TokenId t) const {
  if (t < 0 || static_cast<std::size_t>(t) >= config_.vocab_size) {
    throw ContractViolation("token " + std::to_string(t) + " outside vocabulary of " +
                            std::to_string(config_.vocab_size));
  }
}

std::size_t Policy::parameter_count() const {
  return blocks_.back().offset + blocks_.back().size;
}

const ParameterBlock& Policy::block(std::string_view name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return b;
  }
  throw ContractViolation("no parameter block '" + std::string(name) + "'");
}

Vector Policy::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  out.insert(out.end(), embedding_.span().begin(), embedding_.span().end());
  fusion_.flatten_into(out);
  backbone_.flatten_into(out);
  token_head_.flatten_into(out);
  pose_trunk_.flatten_into(out);
  pose_mean_.flatten_into(out);
  pose_var_.flatten_into(out);
  return Vector(std::move(out));
}

void Policy::restore(std::span<const double> flat) {
  require_same_size(flat.size(), parameter_count(), "policy restore");
  auto slice = [&](std::string_view name) {
    const auto& b = block(name);
    return flat.subspan(b.offset, b.size);
  };
  auto emb = slice("embedding");
  std::copy(emb.begin(), emb.end(), embedding_.span().begin());
  const auto& fc = block("fusion_coarse");
  fusion_.restore(flat.subspan(fc.offset, fc.size + block("fusion_fine").size));
  backbone_.restore(slice("backbone"));
  token_head_.restore(slice("token_head"));
  pose_trunk_.restore(slice("pose_trunk"));
  pose_mean_.restore(slice("pose_mean"));
  pose_var_.restore(slice("pose_var"));
}

Policy::Context Policy::context(const Query& q) const {
  validate(q, config_.vocab_size);
  Context ctx;
  ctx.prompt_mean = Vector(config_.embed_dim);
  std::vector<std::span<const double>> rows;
  for (TokenId t : q.prompt_tokens) rows.push_back(embedding_.row(static_cast<std::size_t>(t)));
  mean_into(rows, ctx.prompt_mean.span());
  if (fusion_.enabled()) {
    if (q.image_features) {
      auto fused = fusion_.fuse(*q.image_features);
      ctx.coarse = std::move(fused[0]);
      ctx.fine = std::move(fused[1]);
    } else {
      ctx.coarse = Vector(config_.embed_dim);
      ctx.fine = Vector(config_.embed_dim);
    }
  }
  return ctx;
}

Vector Policy::state(const Context& ctx, std::span<const TokenId> prefix) const {
  Vector prefix_mean(config_.embed_dim);
  std::vector<std::span<const double>> rows;
  rows.reserve(prefix.size());
  for (TokenId t : prefix) {
    check_token(t);
    rows.push_back(embedding_.row(static_cast<std::size_t>(t)));
  }
  mean_into(rows, prefix_mean.span());
  const Vector len{static_cast<double>(prefix.size()) /
                   static_cast<double>(config_.max_len)};
  Vector input = fusion_.enabled()
                     ? concat({ctx.prompt_mean, ctx.coarse, ctx.fine, prefix_mean, len})
                     : concat({ctx.prompt_mean, prefix_mean, len});
  return backbone_.forward(input);
}

Vector Policy::encode_state(const Query& q, std::span<const TokenId> prefix) const {
  return state(context(q), prefix);
}

Vector Policy::token_logits(const Query& q, std::span<const TokenId> prefix) const {
  return token_head_.forward(encode_state(q, prefix));
}

DiscreteSample Policy::sample_discrete(const Query& q, Rng& rng) const {
  const Context ctx = context(q);
  DiscreteSample out;
  while (out.tokens.size() < config_.max_len) {
    Vector logits = token_head_.forward(state(ctx, out.tokens));
    const Vector probs = softmax(logits);
    const auto tok = static_cast<TokenId>(rng.categorical(probs));
    out.logp += softmax_logprob(logits, static_cast<std::size_t>(tok));
    out.tokens.push_back(tok);
    out.step_logits.push_back(std::move(logits));
    if (tok == config_.end_token) return out;
  }
  out.truncated = true;
  return out;
}

std::vector<Vector> Policy::step_logits(const Query& q,
                                        std::span<const TokenId> tokens) const {
  const Context ctx = context(q);
  std::vector<Vector> out;
  out.reserve(tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    out.push_back(token_head_.forward(state(ctx, tokens.first(t))));
  }
  return out;
}

double Policy::logp_discrete(const Query& q, std::span<const TokenId> tokens) const {
  const auto logits = step_logits(q, tokens);
  double logp = 0.0;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    check_token(tokens[t]);
    logp += softmax_logprob(logits[t], static_cast<std::size_t>(tokens[t]));
  }
  return logp;
}

bool Policy::emits_pose(std::span<const TokenId> tokens) const {
  if (!config_.pose_token) return false;
  return std::count(tokens.begin(), tokens.end(), *config_.pose_token) == 1;
}

GaussianParams Policy::pose_from_state(const Vector& s) const {
  const Vector h = pose_trunk_.forward(s);
  GaussianParams g{pose_mean_.forward(h), pose_var_.forward(h)};
  for (double& v : g.diag_var) v += config_.var_floor;
  return g;
}

GaussianParams Policy::pose_head(const Query& q, std::span<const TokenId> tokens) const {
  if (!config_.pose_token ||
      std::find(tokens.begin(), tokens.end(), *config_.pose_token) == tokens.end()) {
    throw ContractViolation("pose_head: response has no POSE trigger");
  }
  return pose_from_state(encode_state(q, tokens));
}

HybridResponse Policy::sample(const Query& q, Rng& rng) const {
  DiscreteSample d = sample_discrete(q, rng);
  HybridResponse r;
  r.logp_discrete = d.logp;
  r.truncated = d.truncated;
  r.tokens = std::move(d.tokens);
  if (emits_pose(r.tokens)) {
    const GaussianParams g = pose_head(q, r.tokens);
    if (config_.deterministic_pose) {
      r.pose = g.mean;
    } else {
      r.pose = sample_pose(g, rng);
      r.logp_continuous = gaussian_logpdf(*r.pose, g);
    }
  }
  return r;
}

Var Policy::embed(GradTape& tape, TokenId t) const {
  check_token(t);
  const auto row = static_cast<std::size_t>(t);
  return tape.parameter(embedding_.row(row), block("embedding").offset + row * config_.embed_dim);
}

Policy::TapedContext Policy::context(GradTape& tape, const Query& q) const {
  validate(q, config_.vocab_size);
  TapedContext ctx;
  if (q.prompt_tokens.empty()) {
    ctx.prompt_mean = tape.constant(Vector(config_.embed_dim));
  } else {
    std::vector<Var> rows;
    for (TokenId t : q.prompt_tokens) rows.push_back(embed(tape, t));
    ctx.prompt_mean = tape.mean(rows);
  }
  if (fusion_.enabled()) {
    if (q.image_features) {
      auto fused = fusion_.fuse(tape, *q.image_features, block("fusion_coarse").offset);
      ctx.coarse = fused[0];
      ctx.fine = fused[1];
    } else {
      ctx.coarse = tape.constant(Vector(config_.embed_dim));
      ctx.fine = tape.constant(Vector(config_.embed_dim));
    }
  }
  return ctx;
}

Var Policy::state(GradTape& tape, const TapedContext& ctx, std::span<const Var> prefix,
                  std::size_t prefix_len) const {
  Var prefix_mean = prefix_len == 0 ? tape.constant(Vector(config_.embed_dim))
                                    : tape.mean(prefix.first(prefix_len));
  Var len = tape.scalar(static_cast<double>(prefix_len) /
                        static_cast<double>(config_.max_len));
  std::vector<Var> parts;
  if (fusion_.enabled()) {
    parts = {ctx.prompt_mean, ctx.coarse, ctx.fine, prefix_mean, len};
  } else {
    parts = {ctx.prompt_mean, prefix_mean, len};
  }
  return backbone_.forward(tape, tape.concat(parts), block("backbone").offset);
}

Var Policy::logp_discrete(GradTape& tape, const Query& q, std::span<const TokenId> tokens,
                          std::vector<Var>* step_logits) const {
  if (tokens.empty()) return tape.scalar(0.0);
  const TapedContext ctx = context(tape, q);
  std::vector<Var> emb;
  emb.reserve(tokens.size());
  for (TokenId t : tokens) emb.push_back(embed(tape, t));
  std::vector<Var> terms;
  terms.reserve(tokens.size());
  const std::size_t head_offset = block("token_head").offset;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    Var logits = token_head_.forward(tape, state(tape, ctx, emb, t), head_offset);
    if (step_logits) step_logits->push_back(logits);
    terms.push_back(tape.log_softmax_at(logits, static_cast<std::size_t>(tokens[t])));
  }
  return tape.add_n(terms);
}

PoseVars Policy::pose_head(GradTape& tape, const Query& q,
                           std::span<const TokenId> tokens) const {
  if (!config_.pose_token ||
      std::find(tokens.begin(), tokens.end(), *config_.pose_token) == tokens.end()) {
    throw ContractViolation("pose_head: response has no POSE trigger");
  }
  const TapedContext ctx = context(tape, q);
  std::vector<Var> emb;
  emb.reserve(tokens.size());
  for (TokenId t : tokens) emb.push_back(embed(tape, t));
  Var s = state(tape, ctx, emb, tokens.size());
  Var h = pose_trunk_.forward(tape, s, block("pose_trunk").offset);
  PoseVars out;
  out.mean = pose_mean_.forward(tape, h, block("pose_mean").offset);
  out.var = tape.add_scalar(pose_var_.forward(tape, h, block("pose_var").offset),
                            config_.var_floor);
  return out;
}

PolicySnapshot snapshot_reference(const Policy& policy) { return PolicySnapshot(policy); }

double gaussian_logpdf(std::span<const double> p, const GaussianParams& g) {
  require_same_size(p.size(), g.mean.size(), "gaussian_logpdf mean");
  require_same_size(p.size(), g.diag_var.size(), "gaussian_logpdf var");
  double acc = 0.0;
  for (std::size_t d = 0; d < p.size(); ++d) {
    const double v = g.diag_var[d];
    if (!(v > 0.0)) throw ContractViolation("gaussian_logpdf: non-positive variance");
    const double diff = p[d] - g.mean[d];
    acc += std::log(2.0 * std::numbers::pi * v) + diff * diff / v;
  }
  return -0.5 * acc;
}

Vector sample_pose(const GaussianParams& g, Rng& rng) {
  require_same_size(g.mean.size(), g.diag_var.size(), "sample_pose");
  Vector p(g.mean.size());
  for (std::size_t d = 0; d < p.size(); ++d) {
    p[d] = g.mean[d] + std::sqrt(g.diag_var[d]) * rng.normal();
  }
  return p;
}

double kl_gaussian(const GaussianParams& g, const GaussianParams& ref) {
  require_same_size(g.mean.size(), ref.mean.size(), "kl_gaussian mean");
  require_same_size(g.diag_var.size(), ref.diag_var.size(), "kl_gaussian var");
  require_same_size(g.mean.size(), g.diag_var.size(), "kl_gaussian");
  double acc = 0.0;
  for (std::size_t d = 0; d < g.mean.size(); ++d) {
    const double v = g.diag_var[d];
    const double u = ref.diag_var[d];
    if (!(v > 0.0) || !(u > 0.0)) {
      throw ContractViolation("kl_gaussian: non-positive variance");
    }
    const double diff = g.mean[d] - ref.mean[d];
    acc += v / u + diff * diff / u - 1.0 + std::log(u / v);
  }
  return 0.5 * acc;
}

double kl_categorical(std::span<const double> logits, std::span<const double> ref_logits) {
  require_same_size(logits.size(), ref_logits.size(), "kl_categorical");
  const Vector lp = log_softmax(logits);
  const Vector lq = log_softmax(ref_logits);
  double kl = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i) kl += std::exp(lp[i]) * (lp[i] - lq[i]);
  return kl;
}

double kl_discrete(const Policy& policy, const Policy& ref, const Query& q,
                   std::span<const TokenId> tokens) {
  require_same_size(policy.config().vocab_size, ref.config().vocab_size, "kl_discrete");
  const auto a = policy.step_logits(q, tokens);
  const auto b = ref.step_logits(q, tokens);
  double kl = 0.0;
  for (std::size_t t = 0; t < tokens.size(); ++t) kl += kl_categorical(a[t], b[t]);
  return kl;
}

}  // namespace hygrpo

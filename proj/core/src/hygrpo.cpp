#include "hygrpo/hygrpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "hygrpo/error.hpp"

namespace hygrpo {

std::string_view to_string(ReferenceMode m) {
  return m == ReferenceMode::kRefresh ? "refresh" : "fixed";
}

std::string_view to_string(Objective o) {
  return o == Objective::kHybrid ? "hybrid" : "discrete_only";
}

ReferenceMode parse_reference_mode(std::string_view s) {
  if (s == "refresh") return ReferenceMode::kRefresh;
  if (s == "fixed") return ReferenceMode::kFixed;
  throw ConfigError("trainer.reference", "expected refresh or fixed, got '" + std::string(s) + "'");
}

Objective parse_objective(std::string_view s) {
  if (s == "hybrid") return Objective::kHybrid;
  if (s == "discrete_only") return Objective::kDiscreteOnly;
  throw ConfigError("trainer.objective",
                    "expected hybrid or discrete_only, got '" + std::string(s) + "'");
}

void TrainerConfig::validate() const {
  if (group_size < 2) throw ConfigError("trainer.group_size", "must be at least 2");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
    throw ConfigError("trainer.clip_epsilon", "must lie in (0, 1)");
  }
  if (!(clip_epsilon_continuous > 0.0 && clip_epsilon_continuous < 1.0)) {
    throw ConfigError("trainer.clip_epsilon_continuous", "must lie in (0, 1)");
  }
  if (!(kl_beta >= 0.0)) throw ConfigError("trainer.kl_beta", "must be non-negative");
  if (!(kl_beta_continuous >= 0.0)) {
    throw ConfigError("trainer.kl_beta_continuous", "must be non-negative");
  }
  if (!(std_epsilon > 0.0)) throw ConfigError("trainer.std_epsilon", "must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("trainer.learning_rate", "must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) {
    throw ConfigError("trainer.adam_beta1", "must lie in [0, 1)");
  }
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("trainer.adam_beta2", "must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ConfigError("trainer.adam_epsilon", "must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("trainer.weight_decay", "must be non-negative");
  if (batch_size == 0) throw ConfigError("trainer.batch_size", "must be positive");
  if (threads == 0) throw ConfigError("trainer.threads", "must be positive");
}

std::vector<double> group_normalize(std::span<const double> values, double std_epsilon) {
  if (values.empty()) throw ContractViolation("group_normalize: empty group");
  const double n = static_cast<double>(values.size());
  const double mean = sum(values) / n;
  // Second pass on the centred values removes the rounding error of `mean`.
  std::vector<double> centred(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) centred[i] = values[i] - mean;
  const double residual = sum(centred) / n;
  double ss = 0.0;
  for (double& d : centred) {
    d -= residual;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / n);
  std::vector<double> out(values.size(), 0.0);
  if (!(sd >= std_epsilon)) return out;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = centred[i] / sd;
  return out;
}

void normalize_group(GroupBatch& batch, double std_epsilon) {
  batch.v_set.clear();
  std::vector<double> rd;
  std::vector<double> rc;
  for (std::size_t i = 0; i < batch.candidates.size(); ++i) {
    auto& c = batch.candidates[i];
    c.in_v_set = c.response.pose.has_value() && c.response.logp_continuous.has_value() &&
                 c.reward.r_format == 1 && c.reward.r_continuous.has_value();
    rd.push_back(c.reward.r_discrete);
    if (c.in_v_set) {
      batch.v_set.push_back(i);
      rc.push_back(*c.reward.r_continuous);
    }
  }
  batch.f_hat = rd.empty() ? std::vector<double>{} : group_normalize(rd, std_epsilon);
  batch.delta_hat = rc.empty() ? std::vector<double>{} : group_normalize(rc, std_epsilon);
}

void attach_reference(GroupBatch& batch, const Policy& ref) {
  const Query& q = batch.task.query;
  for (auto& c : batch.candidates) {
    c.ref_step_logits = ref.step_logits(q, c.response.tokens);
    c.ref_logp_discrete = 0.0;
    for (std::size_t t = 0; t < c.response.tokens.size(); ++t) {
      c.ref_logp_discrete += softmax_logprob(
          c.ref_step_logits[t], static_cast<std::size_t>(c.response.tokens[t]));
    }
    c.ref_pose.reset();
    c.ref_logp_continuous.reset();
    if (c.response.pose) {
      c.ref_pose = ref.pose_head(q, c.response.tokens);
      c.ref_logp_continuous = gaussian_logpdf(*c.response.pose, *c.ref_pose);
    }
  }
}

ImportanceRatios importance_ratios(const Policy& theta, const Policy& ref, const Query& q,
                                   const HybridResponse& response) {
  const double lp_theta = theta.logp_discrete(q, response.tokens);
  const double lp_ref = ref.logp_discrete(q, response.tokens);
  ImportanceRatios r;
  r.r_d = std::exp(lp_theta - lp_ref);
  double total_theta = lp_theta;
  double total_ref = lp_ref;
  if (response.pose) {
    const double lc_theta = gaussian_logpdf(*response.pose, theta.pose_head(q, response.tokens));
    const double lc_ref = gaussian_logpdf(*response.pose, ref.pose_head(q, response.tokens));
    r.r_c = std::exp(lc_theta - lc_ref);
    total_theta += lc_theta;
    total_ref += lc_ref;
  }
  r.joint = std::exp(total_theta - total_ref);
  const double product = r.r_d * r.r_c.value_or(1.0);
  if (std::abs(product - r.joint) > 1e-12 * std::max(1.0, std::abs(r.joint))) {
    throw ContractViolation("importance ratio factorization violated");
  }
  return r;
}

namespace {

// min(r A, clip(r, 1-eps, 1+eps) A)
Var clipped_surrogate(GradTape& tape, Var ratio, double advantage, double eps) {
  Var unclipped = tape.scale(ratio, advantage);
  Var clipped = tape.scale(tape.clip(ratio, 1.0 - eps, 1.0 + eps), advantage);
  return tape.min(unclipped, clipped);
}

bool outside(double r, double eps) { return r < 1.0 - eps || r > 1.0 + eps; }

}  // namespace

GroupObjective hygrpo_objective(GradTape& tape, const GroupBatch& batch, const Policy& theta,
                                const TrainerConfig& config, bool reference_is_current) {
  GroupObjective out;
  const Query& q = batch.task.query;
  const std::size_t g = batch.candidates.size();
  out.ratios.resize(g);
  if (g == 0) {
    out.objective = tape.scalar(0.0);
    return out;
  }
  const bool kl_d = config.kl_beta > 0.0 && !reference_is_current;
  const bool hybrid = config.objective == Objective::kHybrid;
  const bool kl_c = hybrid && config.kl_beta_continuous > 0.0 && !reference_is_current;

  std::vector<Var> terms_d;
  std::vector<Var> kls_d;
  std::vector<double> lp_theta_d(g, 0.0);
  for (std::size_t i = 0; i < g; ++i) {
    const Candidate& c = batch.candidates[i];
    const double adv = batch.f_hat.at(i);
    ++out.ratio_count;
    if (reference_is_current && adv == 0.0) {
      lp_theta_d[i] = c.ref_logp_discrete;
      continue;
    }
    std::vector<Var> logits;
    Var lp = theta.logp_discrete(tape, q, c.response.tokens, kl_d ? &logits : nullptr);
    lp_theta_d[i] = tape.scalar_value(lp);
    Var ratio = tape.exp(tape.add_scalar(lp, -c.ref_logp_discrete));
    const double r = tape.scalar_value(ratio);
    out.ratios[i].r_d = r;
    if (outside(r, config.clip_epsilon)) ++out.clipped;
    terms_d.push_back(clipped_surrogate(tape, ratio, adv, config.clip_epsilon));
    if (kl_d) {
      for (std::size_t t = 0; t < logits.size(); ++t) {
        kls_d.push_back(tape.categorical_kl(logits[t], c.ref_step_logits.at(t)));
      }
    }
  }

  std::vector<Var> terms_c;
  std::vector<Var> kls_c;
  std::vector<double> lp_theta_c(g, 0.0);
  std::vector<bool> has_c(g, false);
  const std::size_t v = batch.v_set.size();
  if (hybrid) {
    for (std::size_t j = 0; j < v; ++j) {
      const std::size_t i = batch.v_set[j];
      const Candidate& c = batch.candidates[i];
      const double adv = batch.delta_hat.at(j);
      has_c[i] = true;
      ++out.ratio_count;
      if (!c.ref_logp_continuous || !c.ref_pose) {
        throw ContractViolation("v-set candidate lacks reference pose quantities");
      }
      if (reference_is_current && adv == 0.0) {
        lp_theta_c[i] = *c.ref_logp_continuous;
        out.ratios[i].r_c = 1.0;
        continue;
      }
      PoseVars pv = theta.pose_head(tape, q, c.response.tokens);
      Var lp = tape.gaussian_logpdf(*c.response.pose, pv.mean, pv.var);
      lp_theta_c[i] = tape.scalar_value(lp);
      Var ratio = tape.exp(tape.add_scalar(lp, -*c.ref_logp_continuous));
      const double r = tape.scalar_value(ratio);
      out.ratios[i].r_c = r;
      if (outside(r, config.clip_epsilon_continuous)) ++out.clipped;
      terms_c.push_back(clipped_surrogate(tape, ratio, adv, config.clip_epsilon_continuous));
      if (kl_c) {
        kls_c.push_back(tape.gaussian_kl(pv.mean, pv.var, c.ref_pose->mean,
                                         c.ref_pose->diag_var));
      }
    }
  }

  for (std::size_t i = 0; i < g; ++i) {
    const Candidate& c = batch.candidates[i];
    double diff = lp_theta_d[i] - c.ref_logp_discrete;
    if (has_c[i]) diff += lp_theta_c[i] - *c.ref_logp_continuous;
    out.ratios[i].joint = std::exp(diff);
  }

  const double inv_g = 1.0 / static_cast<double>(g);
  const double inv_v = v > 0 ? 1.0 / static_cast<double>(v) : 0.0;
  std::vector<Var> parts;
  if (!terms_d.empty()) {
    Var t = tape.scale(tape.add_n(terms_d), inv_g);
    out.discrete_term = tape.scalar_value(t);
    parts.push_back(t);
  }
  if (!terms_c.empty()) {
    Var t = tape.scale(tape.add_n(terms_c), inv_v);
    out.continuous_term = tape.scalar_value(t);
    parts.push_back(t);
  }
  if (!kls_d.empty()) {
    Var k = tape.scale(tape.add_n(kls_d), inv_g);
    out.kl_discrete = tape.scalar_value(k);
    parts.push_back(tape.scale(k, -config.kl_beta));
  }
  if (!kls_c.empty()) {
    Var k = tape.scale(tape.add_n(kls_c), inv_v);
    out.kl_continuous = tape.scalar_value(k);
    parts.push_back(tape.scale(k, -config.kl_beta_continuous));
  }
  out.objective = parts.empty() ? tape.scalar(0.0) : tape.add_n(parts);
  return out;
}

double hygrpo_loss(const GroupBatch& batch, const Policy& theta, const TrainerConfig& config) {
  GradTape tape(theta.parameter_count());
  return -tape.scalar_value(hygrpo_objective(tape, batch, theta, config).objective);
}

Vector hygrpo_loss_gradient(const GroupBatch& batch, const Policy& theta,
                            const TrainerConfig& config) {
  GradTape tape(theta.parameter_count());
  Var j = hygrpo_objective(tape, batch, theta, config).objective;
  return tape.backward(tape.scale(j, -1.0));
}

Trainer::Trainer(TrainerConfig config, Policy initial, Scorer scorer, std::uint64_t seed)
    : config_(config),
      policy_(std::move(initial)),
      reference_(policy_),
      scorer_(std::move(scorer)),
      optimizer_(policy_.parameter_count(), config.adam_beta1, config.adam_beta2,
                 config.adam_epsilon, config.weight_decay),
      seed_(seed) {
  config_.validate();
  if (policy_.config().deterministic_pose) {
    throw ContractViolation("trainer needs a distributional pose head");
  }
}

void Trainer::restore_state(const Policy& policy, const Policy& reference, AdamState adam,
                            std::size_t step) {
  require_same_size(policy.parameter_count(), policy_.parameter_count(), "restore policy");
  require_same_size(reference.parameter_count(), policy_.parameter_count(),
                    "restore reference");
  policy_ = policy;
  reference_ = PolicySnapshot(reference);
  optimizer_.set_state(std::move(adam));
  step_ = step;
}

GroupBatch Trainer::build_group(const TaskInstance& task, std::size_t query_index) const {
  GroupBatch batch;
  batch.task = task;
  const Query& q = task.query;
  const bool refresh = config_.reference == ReferenceMode::kRefresh;
  std::size_t dropped = 0;
  for (std::size_t k = 0; k < config_.group_size; ++k) {
    Rng rng = make_rng(StreamTag::kCandidate, {seed_, step_, query_index, k});
    DiscreteSample d = policy_.sample_discrete(q, rng);
    Candidate c;
    c.response.tokens = std::move(d.tokens);
    c.response.logp_discrete = d.logp;
    c.response.truncated = d.truncated;
    std::optional<GaussianParams> g;
    if (policy_.emits_pose(c.response.tokens)) {
      g = policy_.pose_head(q, c.response.tokens);
      c.response.pose = sample_pose(*g, rng);
      c.response.logp_continuous = gaussian_logpdf(*c.response.pose, *g);
    }
    if (refresh) {
      c.ref_logp_discrete = c.response.logp_discrete;
      c.ref_step_logits = std::move(d.step_logits);
      c.ref_pose = g;
      c.ref_logp_continuous = c.response.logp_continuous;
    }
    batch.candidates.push_back(std::move(c));
  }
  if (!refresh) attach_reference(batch, reference_.policy());

  std::erase_if(batch.candidates, [&](const Candidate& c) {
    const bool finite =
        std::isfinite(c.response.logp_discrete) && std::isfinite(c.ref_logp_discrete) &&
        (!c.response.logp_continuous || std::isfinite(*c.response.logp_continuous)) &&
        (!c.ref_logp_continuous || std::isfinite(*c.ref_logp_continuous));
    if (!finite) ++dropped;
    return !finite;
  });
  for (auto& c : batch.candidates) c.reward = scorer_(task, c.response);
  normalize_group(batch, config_.std_epsilon);
  return batch;
}

namespace {

template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t workers = std::min(threads, n);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

struct GroupResult {
  GroupBatch batch;
  GroupObjective objective;
  double objective_value = 0.0;
  Vector gradient;
  bool skipped = false;
  bool zero_advantage = true;
  std::size_t group_size = 0;
};

}  // namespace

StepMetrics Trainer::train_step(std::span<const TaskInstance> batch) {
  if (config_.reference == ReferenceMode::kRefresh) reference_ = snapshot_reference(policy_);
  const bool current = config_.reference == ReferenceMode::kRefresh;

  StepMetrics metrics;
  metrics.step = step_;
  metrics.learning_rate =
      scheduled_lr(config_.lr_schedule, config_.learning_rate, step_, config_.steps);

  std::vector<GroupResult> results(batch.size());
  parallel_for(batch.size(), config_.threads, [&](std::size_t qi) {
    GroupResult& res = results[qi];
    res.batch = build_group(batch[qi], qi);
    res.group_size = config_.group_size;
    if (res.batch.candidates.size() < 2) {
      res.skipped = true;
      return;
    }
    for (double a : res.batch.f_hat) res.zero_advantage &= (a == 0.0);
    if (config_.objective == Objective::kHybrid) {
      for (double a : res.batch.delta_hat) res.zero_advantage &= (a == 0.0);
    }
    GradTape tape(policy_.parameter_count());
    res.objective = hygrpo_objective(tape, res.batch, policy_, config_, current);
    res.objective_value = tape.scalar_value(res.objective.objective);
    res.gradient = tape.backward(tape.scale(res.objective.objective, -1.0));
  });

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  Vector grad(policy_.parameter_count());
  bool degenerate = true;
  double objective = 0.0;
  for (const auto& res : results) {
    metrics.dropped_candidates += res.group_size - res.batch.candidates.size();
    if (res.skipped) {
      ++metrics.skipped_groups;
      continue;
    }
    degenerate &= res.zero_advantage;
    objective += res.objective_value;
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += inv_b * res.gradient[i];
    if (record_ratios_) {
      metrics.ratios.insert(metrics.ratios.end(), res.objective.ratios.begin(),
                            res.objective.ratios.end());
    }
  }
  metrics.loss = -inv_b * objective;
  metrics.degenerate = degenerate;
  metrics.non_finite = !std::isfinite(metrics.loss) || !all_finite(grad);

  for (TaskKind kind : kAllTasks) {
    TaskMetrics tm;
    tm.task = kind;
    std::size_t clipped = 0;
    std::size_t ratio_count = 0;
    for (const auto& res : results) {
      if (res.batch.task.query.task != kind || res.skipped) continue;
      ++tm.groups;
      std::vector<RewardBreakdown> rewards;
      for (const auto& c : res.batch.candidates) rewards.push_back(c.reward);
      tm.mean_group_reward += mean_group_reward(kind, rewards);
      tm.loss_discrete -= res.objective.discrete_term;
      tm.loss_continuous -= res.objective.continuous_term;
      tm.kl += res.objective.kl_discrete + res.objective.kl_continuous;
      clipped += res.objective.clipped;
      ratio_count += res.objective.ratio_count;
      tm.v_over_g += static_cast<double>(res.batch.v_set.size()) /
                     static_cast<double>(res.batch.candidates.size());
    }
    if (tm.groups == 0) continue;
    const double n = static_cast<double>(tm.groups);
    tm.mean_group_reward /= n;
    tm.loss_discrete /= n;
    tm.loss_continuous /= n;
    tm.kl /= n;
    tm.v_over_g /= n;
    tm.clip_frac = ratio_count > 0 ? static_cast<double>(clipped) / static_cast<double>(ratio_count)
                                   : 0.0;
    metrics.tasks.push_back(tm);
  }

  if (!metrics.degenerate && !metrics.non_finite) {
    Vector params = policy_.flatten();
    optimizer_.step(params.span(), grad, metrics.learning_rate);
    policy_.restore(params);
  }
  ++step_;
  return metrics;
}

}  // namespace hygrpo

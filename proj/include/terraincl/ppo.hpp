#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "terraincl/env.hpp"
#include "terraincl/error.hpp"
#include "terraincl/parallel.hpp"
#include "terraincl/policy.hpp"
#include "terraincl/rng.hpp"

namespace terraincl {

struct PpoConfig {
  std::size_t steps_per_iteration = 24;
  std::size_t num_minibatches = 4;
  std::size_t epochs = 5;
  double clip_ratio = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double learning_rate = 3e-4;
  double value_coef = 1.0;
  double entropy_coef = 0.005;
  double max_grad_norm = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw ParamError(std::string("ppo: ") + what);
    };
    require(steps_per_iteration > 0, "steps_per_iteration > 0");
    require(num_minibatches > 0, "num_minibatches > 0");
    require(epochs > 0, "epochs > 0");
    require(gamma > 0.0 && gamma <= 1.0, "0 < gamma <= 1");
    require(gae_lambda >= 0.0 && gae_lambda <= 1.0, "0 <= gae_lambda <= 1");
    require(clip_ratio > 0.0, "clip_ratio > 0");
    require(learning_rate > 0.0, "learning_rate > 0");
    require(max_grad_norm > 0.0, "max_grad_norm > 0");
  }
};

// Fixed window of transitions, sample index = step * num_agents + agent.
struct RolloutBuffer {
  std::size_t num_agents = 0;
  std::size_t steps = 0;
  std::size_t obs_dim = kObsDim;
  std::size_t act_dim = kActDim;
  std::vector<float> obs;
  std::vector<float> actions;
  std::vector<float> log_prob;
  std::vector<double> value;
  std::vector<double> reward;
  std::vector<std::uint8_t> terminated;
  std::vector<std::uint8_t> timed_out;
  std::vector<double> bootstrap_value;  // V(final state) at timed-out samples
  std::vector<std::uint8_t> has_bootstrap;
  std::vector<double> last_value;       // V(state after the window), per agent
  bool has_last_value = false;

  RolloutBuffer() = default;
  RolloutBuffer(std::size_t agents, std::size_t window, std::size_t obs_size = kObsDim,
                std::size_t act_size = kActDim) {
    resize(agents, window, obs_size, act_size);
  }

  void resize(std::size_t agents, std::size_t window, std::size_t obs_size = kObsDim,
              std::size_t act_size = kActDim) {
    num_agents = agents;
    steps = window;
    obs_dim = obs_size;
    act_dim = act_size;
    const std::size_t n = agents * window;
    obs.assign(n * obs_dim, 0.0f);
    actions.assign(n * act_dim, 0.0f);
    log_prob.assign(n, 0.0f);
    value.assign(n, 0.0);
    reward.assign(n, 0.0);
    terminated.assign(n, 0);
    timed_out.assign(n, 0);
    bootstrap_value.assign(n, 0.0);
    has_bootstrap.assign(n, 0);
    last_value.assign(agents, 0.0);
    has_last_value = false;
  }

  std::size_t size() const { return num_agents * steps; }
  std::size_t index(std::size_t step, std::size_t agent) const { return step * num_agents + agent; }
};

struct AdvantageSet {
  std::vector<double> advantage;
  std::vector<double> ret;
};

// Restart-aware GAE. A terminated sample cuts the recursion with a zero
// bootstrap; a timed-out sample cuts it but bootstraps from V(final state);
// the last step of the window bootstraps from V(state after the window).
inline AdvantageSet compute_gae(const RolloutBuffer& buf, double gamma, double lambda) {
  if (!buf.has_last_value) throw Fault("gae: missing bootstrap values for the post-window states");
  AdvantageSet out;
  out.advantage.assign(buf.size(), 0.0);
  out.ret.assign(buf.size(), 0.0);
  for (std::size_t a = 0; a < buf.num_agents; ++a) {
    double next_adv = 0.0;
    for (std::size_t t = buf.steps; t-- > 0;) {
      const std::size_t i = buf.index(t, a);
      double delta, adv;
      if (buf.terminated[i]) {
        delta = buf.reward[i] - buf.value[i];
        adv = delta;
      } else if (buf.timed_out[i]) {
        if (!buf.has_bootstrap[i]) throw Fault("gae: timed-out sample without a bootstrap value");
        delta = buf.reward[i] + gamma * buf.bootstrap_value[i] - buf.value[i];
        adv = delta;
      } else {
        const double next_v = (t + 1 == buf.steps) ? buf.last_value[a] : buf.value[buf.index(t + 1, a)];
        const double carry = (t + 1 == buf.steps) ? 0.0 : next_adv;
        delta = buf.reward[i] + gamma * next_v - buf.value[i];
        adv = delta + gamma * lambda * carry;
      }
      out.advantage[i] = adv;
      out.ret[i] = adv + buf.value[i];
      next_adv = adv;
    }
  }
  return out;
}

inline AdvantageSet compute_gae(const RolloutBuffer& buf, const PpoConfig& cfg) {
  return compute_gae(buf, cfg.gamma, cfg.gae_lambda);
}

// Zero mean, unit (population) standard deviation.
inline std::vector<double> normalize_advantages(std::span<const double> adv) {
  const double n = static_cast<double>(adv.size());
  double mean = 0.0;
  for (double a : adv) mean += a;
  mean /= n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double std = std::sqrt(var / n);
  std::vector<double> out(adv.size());
  for (std::size_t i = 0; i < adv.size(); ++i) out[i] = (adv[i] - mean) / (std + 1e-8);
  return out;
}

// Shuffled sample-level partition into k nearly equal minibatches.
inline std::vector<std::vector<std::size_t>> minibatch_partition(std::size_t n, std::size_t k, CounterRng& rng) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  std::vector<std::vector<std::size_t>> parts(k);
  std::size_t pos = 0;
  for (std::size_t p = 0; p < k; ++p) {
    const std::size_t len = n / k + (p < n % k ? 1 : 0);
    parts[p].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                    perm.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return parts;
}

template <typename T>
struct MiniBatch {
  MatrixX<T> obs;      // obs_dim x B
  MatrixX<T> actions;  // act_dim x B
  VectorX<T> log_prob_old;
  VectorX<T> advantages;
  VectorX<T> returns;

  std::size_t size() const { return static_cast<std::size_t>(obs.cols()); }
};

struct LossCoefs {
  double clip_ratio = 0.2;
  double value_coef = 1.0;
  double entropy_coef = 0.005;
};

template <typename T>
struct LossTerms {
  T total = 0;
  T actor = 0;       // clipped surrogate, negated
  T value = 0;       // mean squared error, unscaled
  T entropy = 0;
  T clip_fraction = 0;
  T approx_kl = 0;

  LossTerms& operator+=(const LossTerms& o) {
    total += o.total;
    actor += o.actor;
    value += o.value;
    entropy += o.entropy;
    clip_fraction += o.clip_fraction;
    approx_kl += o.approx_kl;
    return *this;
  }
};

// Sample-dependent part of the PPO loss for columns [begin, end) of a
// minibatch, normalized by `batch` (the full minibatch size). Gradients are
// accumulated into grad when it is non-empty.
template <typename T>
LossTerms<T> ppo_sample_terms(const ActorCritic<T>& model, const MiniBatch<T>& mb, std::size_t begin,
                              std::size_t end, std::size_t batch, const LossCoefs& coefs, std::span<T> grad) {
  const auto cols = static_cast<Eigen::Index>(end - begin);
  const auto b0 = static_cast<Eigen::Index>(begin);
  const std::size_t act_dim = model.shape().act_dim;
  const T inv_b = T(1) / static_cast<T>(batch);
  const T eps = static_cast<T>(coefs.clip_ratio);
  const auto log_std = model.log_std();

  MlpCache<T> actor_cache, critic_cache;
  model.forward_stack(model.actor_layers(), mb.obs.middleCols(b0, cols), actor_cache);
  model.forward_stack(model.critic_layers(), mb.obs.middleCols(b0, cols), critic_cache);
  const MatrixX<T>& mean = actor_cache.output;

  LossTerms<T> terms;
  MatrixX<T> d_mean(static_cast<Eigen::Index>(act_dim), cols);
  MatrixX<T> d_value(1, cols);
  std::vector<T> d_log_std(act_dim, T(0));
  for (Eigen::Index c = 0; c < cols; ++c) {
    const Eigen::Index s = b0 + c;
    T lp = 0;
    for (std::size_t j = 0; j < act_dim; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const T z = (mb.actions(jj, s) - mean(jj, c)) * std::exp(-log_std[j]);
      lp += T(-0.5) * z * z - log_std[j] - T(kHalfLog2Pi);
    }
    const T log_ratio = lp - mb.log_prob_old(s);
    const T ratio = std::exp(log_ratio);
    const T adv = mb.advantages(s);
    const T clipped = std::clamp(ratio, T(1) - eps, T(1) + eps);
    const T unclipped_obj = ratio * adv;
    const T clipped_obj = clipped * adv;
    const bool use_unclipped = unclipped_obj <= clipped_obj;
    terms.actor -= (use_unclipped ? unclipped_obj : clipped_obj) * inv_b;
    if (std::abs(ratio - T(1)) > eps) terms.clip_fraction += inv_b;
    terms.approx_kl += ((ratio - T(1)) - log_ratio) * inv_b;
    const T d_lp = use_unclipped ? -adv * ratio * inv_b : T(0);
    for (std::size_t j = 0; j < act_dim; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const T inv_var = std::exp(T(-2) * log_std[j]);
      const T diff = mb.actions(jj, s) - mean(jj, c);
      d_mean(jj, c) = d_lp * diff * inv_var;
      d_log_std[j] += d_lp * (diff * diff * inv_var - T(1));
    }
    const T v_err = critic_cache.output(0, c) - mb.returns(s);
    terms.value += v_err * v_err * inv_b;
    d_value(0, c) = static_cast<T>(coefs.value_coef) * T(2) * v_err * inv_b;
  }
  terms.total = terms.actor + static_cast<T>(coefs.value_coef) * terms.value;

  if (!grad.empty()) {
    model.backward_stack(model.actor_layers(), actor_cache, std::move(d_mean), grad);
    model.backward_stack(model.critic_layers(), critic_cache, std::move(d_value), grad);
    for (std::size_t j = 0; j < act_dim; ++j) grad[model.log_std_offset() + j] += d_log_std[j];
  }
  return terms;
}

// Entropy bonus: sample independent for a state-independent log-std.
template <typename T>
void add_entropy_term(const ActorCritic<T>& model, const LossCoefs& coefs, LossTerms<T>& terms, std::span<T> grad) {
  terms.entropy = entropy<T>(model.log_std());
  terms.total -= static_cast<T>(coefs.entropy_coef) * terms.entropy;
  if (!grad.empty()) {
    for (std::size_t j = 0; j < model.shape().act_dim; ++j)
      grad[model.log_std_offset() + j] -= static_cast<T>(coefs.entropy_coef);
  }
}

// Full PPO loss and its gradient on one minibatch, single pass.
template <typename T>
LossTerms<T> ppo_loss_and_grad(const ActorCritic<T>& model, const MiniBatch<T>& mb, const LossCoefs& coefs,
                               std::span<T> grad) {
  if (!grad.empty() && grad.size() != model.size()) throw Fault("ppo: gradient buffer size mismatch");
  LossTerms<T> terms = ppo_sample_terms(model, mb, 0, mb.size(), mb.size(), coefs, grad);
  add_entropy_term(model, coefs, terms, grad);
  return terms;
}

// Adam on a flat parameter vector.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, double lr, double beta1, double beta2, double epsilon)
      : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon), m_(n, 0.0f), v_(n, 0.0f) {}

  void step(std::span<float> params, std::span<const float> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) throw Fault("adam: size mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const float step = static_cast<float>(lr_ / bc1);
    const float inv_bc2 = static_cast<float>(1.0 / bc2);
    const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
    const float eps = static_cast<float>(epsilon_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = b1 * m_[i] + (1.0f - b1) * grad[i];
      v_[i] = b2 * v_[i] + (1.0f - b2) * grad[i] * grad[i];
      params[i] -= step * m_[i] / (std::sqrt(v_[i] * inv_bc2) + eps);
    }
  }

  std::uint64_t steps() const { return t_; }

 private:
  double lr_ = 3e-4, beta1_ = 0.9, beta2_ = 0.999, epsilon_ = 1e-8;
  std::uint64_t t_ = 0;
  std::vector<float> m_, v_;
};

struct UpdateStats {
  double loss_actor = 0.0;
  double loss_value = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  std::size_t optimizer_steps = 0;
  bool faulted = false;
  std::string fault;
};

// Owns the optimizer state and the minibatch shuffle stream.
class PpoLearner {
 public:
  static constexpr std::size_t kChunk = 256;

  PpoLearner(Policy& policy, PpoConfig cfg, std::uint64_t shuffle_seed)
      : policy_(policy),
        cfg_(cfg),
        adam_(policy.size(), cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon),
        shuffle_rng_(shuffle_seed) {
    cfg_.validate();
  }

  const PpoConfig& config() const { return cfg_; }
  const Adam& optimizer() const { return adam_; }

  UpdateStats update(const RolloutBuffer& buf, const AdvantageSet& adv) {
    if (adv.advantage.size() != buf.size()) throw Fault("ppo: advantage set does not match buffer");
    const std::vector<double> norm_adv = normalize_advantages(adv.advantage);
    const std::vector<float> backup(policy_.params().begin(), policy_.params().end());
    const Adam adam_backup = adam_;
    const LossCoefs coefs{cfg_.clip_ratio, cfg_.value_coef, cfg_.entropy_coef};

    UpdateStats stats;
    std::vector<float> grad(policy_.size());
    MiniBatch<float> mb;
    for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
      const auto parts = minibatch_partition(buf.size(), cfg_.num_minibatches, shuffle_rng_);
      for (const auto& part : parts) {
        if (part.empty()) continue;
        gather(buf, adv, norm_adv, part, mb);
        std::fill(grad.begin(), grad.end(), 0.0f);
        const LossTerms<float> terms = chunked_loss_and_grad(mb, coefs, grad);
        double norm2 = 0.0;
        for (float g : grad) norm2 += static_cast<double>(g) * g;
        if (!std::isfinite(terms.total) || !std::isfinite(norm2)) {
          std::copy(backup.begin(), backup.end(), policy_.params().begin());
          adam_ = adam_backup;
          UpdateStats failed;
          failed.faulted = true;
          failed.fault = "non-finite loss or gradient; update reverted";
          return failed;
        }
        const double norm = std::sqrt(norm2);
        if (norm > cfg_.max_grad_norm) {
          const auto scale = static_cast<float>(cfg_.max_grad_norm / norm);
          for (float& g : grad) g *= scale;
        }
        adam_.step(policy_.params(), grad);
        policy_.clamp_log_std();
        stats.loss_actor += terms.actor;
        stats.loss_value += terms.value;
        stats.entropy += terms.entropy;
        stats.clip_fraction += terms.clip_fraction;
        stats.approx_kl += terms.approx_kl;
        ++stats.optimizer_steps;
      }
    }
    if (stats.optimizer_steps > 0) {
      const auto n = static_cast<double>(stats.optimizer_steps);
      stats.loss_actor /= n;
      stats.loss_value /= n;
      stats.entropy /= n;
      stats.clip_fraction /= n;
      stats.approx_kl /= n;
    }
    return stats;
  }

  // Per-chunk gradients summed in chunk order: independent of worker count.
  LossTerms<float> chunked_loss_and_grad(const MiniBatch<float>& mb, const LossCoefs& coefs, std::span<float> grad) {
    const std::size_t n = mb.size();
    const std::size_t chunks = chunk_count(n, kChunk);
    chunk_grads_.resize(chunks);
    std::vector<LossTerms<float>> chunk_terms(chunks);
    parallel_chunks(chunks, [&](std::size_t c) {
      const auto r = chunk_range(n, kChunk, c);
      auto& g = chunk_grads_[c];
      g.assign(policy_.size(), 0.0f);
      chunk_terms[c] = ppo_sample_terms<float>(policy_, mb, r.begin, r.end, n, coefs, g);
    });
    LossTerms<float> terms;
    for (std::size_t c = 0; c < chunks; ++c) {
      terms += chunk_terms[c];
      const auto& g = chunk_grads_[c];
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
    }
    add_entropy_term<float>(policy_, coefs, terms, grad);
    return terms;
  }

 private:
  static void gather(const RolloutBuffer& buf, const AdvantageSet& adv, const std::vector<double>& norm_adv,
                     const std::vector<std::size_t>& idx, MiniBatch<float>& mb) {
    const auto b = static_cast<Eigen::Index>(idx.size());
    mb.obs.resize(static_cast<Eigen::Index>(buf.obs_dim), b);
    mb.actions.resize(static_cast<Eigen::Index>(buf.act_dim), b);
    mb.log_prob_old.resize(b);
    mb.advantages.resize(b);
    mb.returns.resize(b);
    for (Eigen::Index c = 0; c < b; ++c) {
      const std::size_t s = idx[static_cast<std::size_t>(c)];
      std::copy_n(buf.obs.data() + s * buf.obs_dim, buf.obs_dim, mb.obs.col(c).data());
      std::copy_n(buf.actions.data() + s * buf.act_dim, buf.act_dim, mb.actions.col(c).data());
      mb.log_prob_old(c) = buf.log_prob[s];
      mb.advantages(c) = static_cast<float>(norm_adv[s]);
      mb.returns(c) = static_cast<float>(adv.ret[s]);
    }
  }

  Policy& policy_;
  PpoConfig cfg_;
  Adam adam_;
  CounterRng shuffle_rng_;
  std::vector<std::vector<float>> chunk_grads_;
};

// ---- rollout ----------------------------------------------------------------

inline constexpr std::size_t kForwardChunk = 256;

// Batched policy evaluation over agent-major observations (n x obs_dim).
// Chunks are fixed-size so results do not depend on worker count.
inline void evaluate_policy(const Policy& policy, std::span<const float> obs, std::size_t n, bool want_value,
                            std::vector<float>& mean, std::vector<float>& value) {
  const std::size_t obs_dim = policy.shape().obs_dim, act_dim = policy.shape().act_dim;
  if (obs.size() != n * obs_dim) throw Fault("policy: observation batch has wrong size");
  policy.check_finite();
  mean.resize(n * act_dim);
  if (want_value) value.resize(n);
  parallel_chunks(chunk_count(n, kForwardChunk), [&](std::size_t c) {
    const auto r = chunk_range(n, kForwardChunk, c);
    const auto cols = static_cast<Eigen::Index>(r.end - r.begin);
    Eigen::Map<const MatrixX<float>> x(obs.data() + r.begin * obs_dim, static_cast<Eigen::Index>(obs_dim), cols);
    MatrixX<float> m;
    policy.forward_actor(x, m);
    std::copy_n(m.data(), m.size(), mean.data() + r.begin * act_dim);
    if (want_value) {
      VectorX<float> v;
      policy.forward_critic(x, v);
      std::copy_n(v.data(), v.size(), value.data() + r.begin);
    }
  });
}

inline void evaluate_values(const Policy& policy, std::span<const float> obs, std::size_t n,
                            std::vector<float>& value) {
  const std::size_t obs_dim = policy.shape().obs_dim;
  if (obs.size() != n * obs_dim) throw Fault("policy: observation batch has wrong size");
  value.resize(n);
  parallel_chunks(chunk_count(n, kForwardChunk), [&](std::size_t c) {
    const auto r = chunk_range(n, kForwardChunk, c);
    Eigen::Map<const MatrixX<float>> x(obs.data() + r.begin * obs_dim, static_cast<Eigen::Index>(obs_dim),
                                       static_cast<Eigen::Index>(r.end - r.begin));
    VectorX<float> v;
    policy.forward_critic(x, v);
    std::copy_n(v.data(), v.size(), value.data() + r.begin);
  });
}

// Called for every episode that ended naturally (terminated or timed out).
using EpisodeSink = std::function<void(std::size_t agent, double total)>;

// Fills `buf` with steps_per_iteration transitions per agent. Actions are drawn
// from the policy's Gaussian using one random stream per agent.
inline void collect_rollout(const Policy& policy, VecEnv& env, RolloutBuffer& buf, std::vector<CounterRng>& rngs,
                            const EpisodeSink& sink) {
  const std::size_t n = env.num_agents();
  if (rngs.size() != n) throw Fault("rollout: one random stream per agent required");
  if (buf.num_agents != n || buf.obs_dim != kObsDim || buf.act_dim != kActDim)
    throw Fault("rollout: buffer shape does not match environment");
  std::fill(buf.has_bootstrap.begin(), buf.has_bootstrap.end(), 0);
  std::fill(buf.bootstrap_value.begin(), buf.bootstrap_value.end(), 0.0);

  const auto log_std = policy.log_std();
  std::vector<float> mean, value, actions(n * kActDim), final_values;
  std::vector<float> final_obs;
  std::vector<std::size_t> timed_out_agents;
  for (std::size_t t = 0; t < buf.steps; ++t) {
    const auto obs = env.observations();
    evaluate_policy(policy, obs, n, true, mean, value);
    std::copy(obs.begin(), obs.end(), buf.obs.begin() + static_cast<std::ptrdiff_t>(buf.index(t, 0) * kObsDim));
    for (std::size_t a = 0; a < n; ++a) {
      float* act = actions.data() + a * kActDim;
      const float* mu = mean.data() + a * kActDim;
      for (std::size_t j = 0; j < kActDim; ++j)
        act[j] = mu[j] + std::exp(log_std[j]) * static_cast<float>(rngs[a].normal());
      const std::size_t i = buf.index(t, a);
      buf.log_prob[i] = log_prob<float>({mu, kActDim}, log_std, {act, kActDim});
      buf.value[i] = value[a];
    }
    std::copy(actions.begin(), actions.end(),
              buf.actions.begin() + static_cast<std::ptrdiff_t>(buf.index(t, 0) * kActDim));

    const StepBatch& res = env.step(actions);
    timed_out_agents.clear();
    for (std::size_t a = 0; a < n; ++a) {
      const std::size_t i = buf.index(t, a);
      buf.reward[i] = res.reward[a];
      buf.terminated[i] = res.terminated[a];
      buf.timed_out[i] = res.timed_out[a];
      if (res.timed_out[a]) timed_out_agents.push_back(a);
      if (res.done(a) && sink) sink(a, res.episode_total[a]);
    }
    if (!timed_out_agents.empty()) {
      final_obs.resize(timed_out_agents.size() * kObsDim);
      for (std::size_t k = 0; k < timed_out_agents.size(); ++k)
        std::copy_n(res.terminal_obs.data() + timed_out_agents[k] * kObsDim, kObsDim,
                    final_obs.data() + k * kObsDim);
      evaluate_values(policy, final_obs, timed_out_agents.size(), final_values);
      for (std::size_t k = 0; k < timed_out_agents.size(); ++k) {
        const std::size_t i = buf.index(t, timed_out_agents[k]);
        buf.bootstrap_value[i] = final_values[k];
        buf.has_bootstrap[i] = 1;
      }
    }
  }
  evaluate_values(policy, env.observations(), n, final_values);
  for (std::size_t a = 0; a < n; ++a) buf.last_value[a] = final_values[a];
  buf.has_last_value = true;
}

}  // namespace terraincl

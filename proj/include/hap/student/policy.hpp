#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hap/core/error.hpp"
#include "hap/core/rng.hpp"
#include "hap/envs/environment.hpp"
#include "hap/tensor/adam.hpp"
#include "hap/tensor/categorical.hpp"
#include "hap/tensor/checkpoint.hpp"
#include "hap/tensor/mlp.hpp"

namespace hap::student {

using tensor::Matrix;
using tensor::Mlp;
using tensor::SparseVec;
using tensor::Vector;

enum class StudentAlgo { kA2C, kPPO };

inline std::string algo_name(StudentAlgo a) { return a == StudentAlgo::kA2C ? "a2c" : "ppo"; }

inline StudentAlgo parse_algo(const std::string& s) {
  if (s == "a2c") return StudentAlgo::kA2C;
  if (s == "ppo") return StudentAlgo::kPPO;
  throw ConfigError("unknown student algorithm '" + s + "'");
}

struct StudentConfig {
  StudentAlgo algo = StudentAlgo::kA2C;
  std::vector<std::size_t> hidden{256, 128};
  double policy_lr = 1e-4;
  double value_lr = 1e-4;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.1;
  int ppo_epochs = 4;
  int minibatches = 4;
  double ent_coef = 0.01;
  double vf_coef = 0.5;
  double max_grad_norm = 0.5;  ///< per network; 0 disables clipping
  bool normalize_advantages = false;
  std::size_t embedding_dim = 0;  ///< 0 = one-hot task input
  double actor_output_scale = 0.01;
};

struct UpdateReport {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double actor_grad_norm = 0.0;
  double critic_grad_norm = 0.0;
  double clip_fraction = 0.0;
  std::size_t steps = 0;
};

/// Per-step advantages and value targets of one trajectory.
struct AdvantageBatch {
  std::vector<double> advantages;
  std::vector<double> returns;
  std::vector<double> old_logp;
};

/// GAE(lambda). `bootstrap` is V(s_T) for truncated episodes and 0 for terminal ones.
inline AdvantageBatch compute_gae(std::span<const double> rewards, std::span<const double> values, double bootstrap,
                                  double gamma, double lambda) {
  require(rewards.size() == values.size(), "gae: rewards and values differ in length");
  AdvantageBatch out;
  const std::size_t n = rewards.size();
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_value = bootstrap, running = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double delta = rewards[t] + gamma * next_value - values[t];
    running = delta + gamma * lambda * running;
    out.advantages[t] = running;
    out.returns[t] = running + values[t];
    next_value = values[t];
  }
  return out;
}

/// Task-conditioned actor-critic with separate actor and critic networks.
class StudentPolicy {
 public:
  StudentPolicy(envs::ObservationEncoder encoder, int action_count, StudentConfig config, RngStream rng)
      : enc_(encoder), actions_(action_count), config_(std::move(config)), rng_(rng.split("updates")) {
    require(action_count > 0, "student: no actions");
    require(config_.gamma > 0.0 && config_.gamma <= 1.0, "student: gamma must lie in (0, 1]");
    require(config_.clip_eps > 0.0, "student: clip epsilon must be positive");
    require(config_.ppo_epochs >= 1 && config_.minibatches >= 1, "student: ppo epochs and minibatches must be >= 1");
    const std::size_t width =
        enc_.state_width() + (config_.embedding_dim > 0 ? config_.embedding_dim : enc_.task_count);
    std::vector<std::size_t> actor_sizes{width}, critic_sizes{width};
    for (auto h : config_.hidden) {
      actor_sizes.push_back(h);
      critic_sizes.push_back(h);
    }
    actor_sizes.push_back(static_cast<std::size_t>(action_count));
    critic_sizes.push_back(1);
    RngStream init = rng.split("init");
    RngStream actor_rng = init.split("actor"), critic_rng = init.split("critic");
    actor_ = Mlp::random(actor_sizes, actor_rng, config_.actor_output_scale);
    critic_ = Mlp::random(critic_sizes, critic_rng);
    actor_opt_ = tensor::AdamState(actor_.parameter_count(), config_.policy_lr);
    critic_opt_ = tensor::AdamState(critic_.parameter_count(), config_.value_lr);
    if (config_.embedding_dim > 0) {
      const auto n = static_cast<Eigen::Index>(enc_.task_count * config_.embedding_dim);
      actor_embed_ = Vector(n);
      critic_embed_ = Vector(n);
      RngStream er = init.split("embedding");
      for (Eigen::Index i = 0; i < n; ++i) actor_embed_(i) = er.uniform(-1.0, 1.0);
      for (Eigen::Index i = 0; i < n; ++i) critic_embed_(i) = er.uniform(-1.0, 1.0);
      actor_embed_opt_ = tensor::AdamState(static_cast<std::size_t>(n), config_.policy_lr);
      critic_embed_opt_ = tensor::AdamState(static_cast<std::size_t>(n), config_.value_lr);
    }
  }

  [[nodiscard]] const StudentConfig& config() const { return config_; }
  [[nodiscard]] const envs::ObservationEncoder& encoder() const { return enc_; }
  [[nodiscard]] int action_count() const { return actions_; }
  [[nodiscard]] Mlp& actor() { return actor_; }
  [[nodiscard]] const Mlp& actor() const { return actor_; }
  [[nodiscard]] Mlp& critic() { return critic_; }
  [[nodiscard]] const Mlp& critic() const { return critic_; }
  [[nodiscard]] Vector& actor_embedding() { return actor_embed_; }
  [[nodiscard]] Vector& critic_embedding() { return critic_embed_; }

  /// Network input for an encoded state and task.
  [[nodiscard]] SparseVec features(SparseVec state, std::size_t task, bool for_actor) const {
    require(task < enc_.task_count, "student: task index out of range");
    const auto sw = static_cast<std::uint32_t>(enc_.state_width());
    if (config_.embedding_dim == 0) {
      state.push(sw + static_cast<std::uint32_t>(task), 1.0);
    } else {
      const Vector& e = for_actor ? actor_embed_ : critic_embed_;
      const auto d = config_.embedding_dim;
      for (std::size_t j = 0; j < d; ++j)
        state.push(sw + static_cast<std::uint32_t>(j), e(static_cast<Eigen::Index>(task * d + j)));
    }
    return state;
  }

  [[nodiscard]] std::vector<double> logits(const envs::Observation& obs) const {
    SparseVec x = features(enc_.encode_state(obs), obs.task, true);
    Matrix y = tensor::forward(actor_, std::span<const SparseVec>(&x, 1));
    return {y.data(), y.data() + y.size()};
  }

  [[nodiscard]] tensor::Categorical action_distribution(const envs::Observation& obs) const {
    return tensor::softmax(logits(obs));
  }

  /// Samples an action; writes its log-probability when `logp` is given.
  int act(const envs::Observation& obs, RngStream& rng, double* logp = nullptr) const {
    auto z = logits(obs);
    auto lp = tensor::log_softmax(z);
    std::vector<double> p(lp.size());
    double total = 0.0;
    for (std::size_t i = 0; i < lp.size(); ++i) total += p[i] = std::exp(lp[i]);
    double u = rng.uniform() * total;
    std::size_t a = 0;
    for (; a + 1 < p.size(); ++a) {
      if (u < p[a]) break;
      u -= p[a];
    }
    if (logp) *logp = lp[a];
    return static_cast<int>(a);
  }

  /// Argmax of the actor logits; ties go to the lowest index.
  [[nodiscard]] int act_greedy(const envs::Observation& obs) const { return greedy_index(logits(obs)); }

  static int greedy_index(std::span<const double> z) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < z.size(); ++i)
      if (z[i] > z[best]) best = i;
    return static_cast<int>(best);
  }

  [[nodiscard]] double value(const envs::Observation& obs) const {
    SparseVec x = features(enc_.encode_state(obs), obs.task, false);
    Matrix y = tensor::forward(critic_, std::span<const SparseVec>(&x, 1));
    return y(0, 0);
  }

  /// Advantages for each trajectory from the current critic.
  [[nodiscard]] std::vector<AdvantageBatch> advantages(const std::vector<envs::Trajectory>& batch) const {
    std::vector<AdvantageBatch> out;
    for (const auto& tr : batch) {
      std::vector<SparseVec> xs;
      xs.reserve(tr.steps.size());
      std::vector<double> rewards;
      for (const auto& s : tr.steps) {
        xs.push_back(features(enc_.encode_state(s.obs), tr.task, false));
        rewards.push_back(s.reward);
      }
      std::vector<double> values(tr.steps.size(), 0.0);
      if (!xs.empty()) {
        Matrix v = tensor::forward(critic_, std::span<const SparseVec>(xs));
        for (std::size_t i = 0; i < values.size(); ++i) values[i] = v(0, static_cast<Eigen::Index>(i));
      }
      const double bootstrap = tr.terminated ? 0.0 : value(tr.final_obs);
      auto adv = compute_gae(rewards, values, bootstrap, config_.gamma, config_.gae_lambda);
      for (const auto& s : tr.steps) adv.old_logp.push_back(s.logp);
      out.push_back(std::move(adv));
    }
    return out;
  }

  UpdateReport update(const std::vector<envs::Trajectory>& batch) {
    return config_.algo == StudentAlgo::kA2C ? update_a2c(batch) : update_ppo(batch);
  }

  /// One Adam step on  -mean(logpi * A) - ent_coef * H + vf_coef * mean((V - R)^2).
  UpdateReport update_a2c(const std::vector<envs::Trajectory>& batch) {
    Flat flat = flatten(batch);
    std::vector<std::size_t> all(flat.size());
    std::iota(all.begin(), all.end(), 0);
    return step_on(flat, all, /*ppo=*/false);
  }

  /// Clipped-surrogate PPO over `ppo_epochs` passes of shuffled minibatches.
  UpdateReport update_ppo(const std::vector<envs::Trajectory>& batch) {
    Flat flat = flatten(batch);
    std::vector<std::size_t> order(flat.size());
    std::iota(order.begin(), order.end(), 0);
    UpdateReport total;
    int count = 0;
    const auto mbs = std::min<std::size_t>(static_cast<std::size_t>(config_.minibatches), flat.size());
    for (int epoch = 0; epoch < config_.ppo_epochs; ++epoch) {
      rng_.shuffle(order);
      for (std::size_t m = 0; m < mbs; ++m) {
        const std::size_t lo = m * flat.size() / mbs, hi = (m + 1) * flat.size() / mbs;
        std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                     order.begin() + static_cast<std::ptrdiff_t>(hi));
        auto r = step_on(flat, idx, /*ppo=*/true);
        total.policy_loss += r.policy_loss;
        total.value_loss += r.value_loss;
        total.entropy += r.entropy;
        total.actor_grad_norm += r.actor_grad_norm;
        total.critic_grad_norm += r.critic_grad_norm;
        total.clip_fraction += r.clip_fraction;
        ++count;
      }
    }
    for (double* f : {&total.policy_loss, &total.value_loss, &total.entropy, &total.actor_grad_norm,
                      &total.critic_grad_norm, &total.clip_fraction})
      *f /= count;
    total.steps = flat.size();
    return total;
  }

  /// Gradients of the combined loss at the current parameters, without stepping (for checks).
  struct Gradients {
    Vector actor;
    Vector critic;
    Vector actor_embedding;   ///< empty without embedding tables
    Vector critic_embedding;
    UpdateReport report;
  };
  [[nodiscard]] Gradients loss_gradients(const std::vector<envs::Trajectory>& batch, bool ppo) const {
    Flat flat = flatten(batch);
    std::vector<std::size_t> all(flat.size());
    std::iota(all.begin(), all.end(), 0);
    Gradients g;
    const bool embed = config_.embedding_dim > 0;
    g.report = compute(flat, all, ppo, g.actor, g.critic, embed ? &g.actor_embedding : nullptr,
                       embed ? &g.critic_embedding : nullptr);
    return g;
  }

  [[nodiscard]] tensor::Checkpoint to_checkpoint(std::uint64_t seed) const {
    tensor::Checkpoint c;
    c.seed = seed;
    c.nets.push_back({"actor", actor_});
    c.nets.push_back({"critic", critic_});
    if (config_.embedding_dim > 0) {
      c.arrays.push_back({"actor_embedding", {actor_embed_.data(), actor_embed_.data() + actor_embed_.size()}});
      c.arrays.push_back({"critic_embedding", {critic_embed_.data(), critic_embed_.data() + critic_embed_.size()}});
    }
    return c;
  }

  void load_checkpoint(const tensor::Checkpoint& c) {
    const Mlp& a = c.net("actor");
    const Mlp& v = c.net("critic");
    if (a.layer_sizes() != actor_.layer_sizes() || v.layer_sizes() != critic_.layer_sizes())
      throw FormatError("student checkpoint: network shape mismatch");
    actor_ = a;
    critic_ = v;
    if (config_.embedding_dim > 0) {
      auto* ae = c.array("actor_embedding");
      auto* ce = c.array("critic_embedding");
      if (!ae || !ce || ae->size() != static_cast<std::size_t>(actor_embed_.size()) ||
          ce->size() != static_cast<std::size_t>(critic_embed_.size()))
        throw FormatError("student checkpoint: embedding table missing or mis-sized");
      actor_embed_ = Eigen::Map<const Vector>(ae->data(), static_cast<Eigen::Index>(ae->size()));
      critic_embed_ = Eigen::Map<const Vector>(ce->data(), static_cast<Eigen::Index>(ce->size()));
    }
  }

 private:
  struct Flat {
    std::vector<SparseVec> states;
    std::vector<std::size_t> tasks;
    std::vector<int> actions;
    std::vector<double> advantages;
    std::vector<double> returns;
    std::vector<double> old_logp;
    [[nodiscard]] std::size_t size() const { return states.size(); }
  };

  [[nodiscard]] Flat flatten(const std::vector<envs::Trajectory>& batch) const {
    require(!batch.empty(), "student update: empty trajectory batch");
    auto adv = advantages(batch);
    Flat f;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& tr = batch[i];
      for (std::size_t t = 0; t < tr.steps.size(); ++t) {
        const auto& s = tr.steps[t];
        require(s.action >= 0 && s.action < actions_, "student update: action id out of range");
        f.states.push_back(enc_.encode_state(s.obs));
        f.tasks.push_back(tr.task);
        f.actions.push_back(s.action);
        f.advantages.push_back(adv[i].advantages[t]);
        f.returns.push_back(adv[i].returns[t]);
        f.old_logp.push_back(s.logp);
      }
    }
    require(f.size() > 0, "student update: batch has no steps");
    if (config_.normalize_advantages && f.size() > 1) {
      const double n = static_cast<double>(f.size());
      const double mean = std::accumulate(f.advantages.begin(), f.advantages.end(), 0.0) / n;
      double var = 0.0;
      for (double a : f.advantages) var += (a - mean) * (a - mean);
      const double sd = std::sqrt(var / n) + 1e-8;
      for (double& a : f.advantages) a = (a - mean) / sd;
    }
    return f;
  }

  UpdateReport step_on(const Flat& flat, const std::vector<std::size_t>& idx, bool ppo) {
    Vector ga, gc, gea, gec;
    auto report = compute(flat, idx, ppo, ga, gc, config_.embedding_dim > 0 ? &gea : nullptr,
                          config_.embedding_dim > 0 ? &gec : nullptr);
    if (config_.embedding_dim > 0) {
      // Embedding tables are clipped together with their network.
      Vector ja(ga.size() + gea.size()), jc(gc.size() + gec.size());
      ja << ga, gea;
      jc << gc, gec;
      report.actor_grad_norm = tensor::clip_grad_norm(ja, config_.max_grad_norm);
      report.critic_grad_norm = tensor::clip_grad_norm(jc, config_.max_grad_norm);
      ga = ja.head(ga.size());
      gea = ja.tail(gea.size());
      gc = jc.head(gc.size());
      gec = jc.tail(gec.size());
      tensor::adam_step(actor_embed_, gea, actor_embed_opt_);
      tensor::adam_step(critic_embed_, gec, critic_embed_opt_);
    } else {
      report.actor_grad_norm = tensor::clip_grad_norm(ga, config_.max_grad_norm);
      report.critic_grad_norm = tensor::clip_grad_norm(gc, config_.max_grad_norm);
    }
    tensor::adam_step(actor_.parameters(), ga, actor_opt_);
    tensor::adam_step(critic_.parameters(), gc, critic_opt_);
    return report;
  }

  UpdateReport compute(const Flat& flat, const std::vector<std::size_t>& idx, bool ppo, Vector& actor_grad,
                       Vector& critic_grad, Vector* actor_embed_grad, Vector* critic_embed_grad) const {
    const auto n = static_cast<Eigen::Index>(idx.size());
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<SparseVec> xa, xc;
    xa.reserve(idx.size());
    xc.reserve(idx.size());
    for (auto i : idx) {
      xa.push_back(features(flat.states[i], flat.tasks[i], true));
      xc.push_back(features(flat.states[i], flat.tasks[i], false));
    }
    UpdateReport rep;
    rep.steps = idx.size();

    tensor::MlpCache ca;
    Matrix z = tensor::forward(actor_, std::span<const SparseVec>(xa), &ca);
    Matrix gz(z.rows(), z.cols());
    int clipped = 0;
    for (Eigen::Index b = 0; b < n; ++b) {
      const auto i = idx[static_cast<std::size_t>(b)];
      auto col = z.col(b);
      const double mx = col.maxCoeff();
      Vector p = (col.array() - mx).exp();
      const double s = p.sum();
      p /= s;
      Vector logp = (col.array() - mx - std::log(s)).matrix();
      double h = 0.0;
      for (Eigen::Index k = 0; k < p.size(); ++k)
        if (p(k) > 0) h -= p(k) * logp(k);
      const int a = flat.actions[i];
      const double adv = flat.advantages[i];
      Vector score = -p;
      score(a) += 1.0;  // d log pi(a) / dz
      double coeff = adv;  // multiplier of the score in the policy-loss gradient
      if (ppo) {
        const double ratio = std::exp(logp(a) - flat.old_logp[i]);
        const double clipped_ratio = std::clamp(ratio, 1.0 - config_.clip_eps, 1.0 + config_.clip_eps);
        rep.policy_loss -= std::min(ratio * adv, clipped_ratio * adv) * inv_n;
        const bool saturated = (adv > 0 && ratio > 1.0 + config_.clip_eps) || (adv < 0 && ratio < 1.0 - config_.clip_eps);
        if (saturated) ++clipped;
        coeff = saturated ? 0.0 : adv * ratio;
      } else {
        rep.policy_loss -= logp(a) * adv * inv_n;
      }
      rep.entropy += h * inv_n;
      // d(-H)/dz = p * (log p + H)
      Vector neg_h_grad = p.cwiseProduct(logp + Vector::Constant(p.size(), h));
      gz.col(b) = (-coeff * score + config_.ent_coef * neg_h_grad) * inv_n;
    }
    rep.clip_fraction = static_cast<double>(clipped) * inv_n;
    actor_grad = Vector::Zero(static_cast<Eigen::Index>(actor_.parameter_count()));
    Matrix da;
    tensor::backward(actor_, ca, gz, actor_grad, nullptr, actor_embed_grad ? &da : nullptr);

    tensor::MlpCache cc;
    Matrix v = tensor::forward(critic_, std::span<const SparseVec>(xc), &cc);
    Matrix gv(1, n);
    for (Eigen::Index b = 0; b < n; ++b) {
      const double err = v(0, b) - flat.returns[idx[static_cast<std::size_t>(b)]];
      rep.value_loss += err * err * inv_n;
      gv(0, b) = 2.0 * config_.vf_coef * err * inv_n;
    }
    critic_grad = Vector::Zero(static_cast<Eigen::Index>(critic_.parameter_count()));
    Matrix dc;
    tensor::backward(critic_, cc, gv, critic_grad, nullptr, critic_embed_grad ? &dc : nullptr);

    if (actor_embed_grad) {
      embedding_grad(actor_, da, flat, idx, *actor_embed_grad);
      embedding_grad(critic_, dc, flat, idx, *critic_embed_grad);
    }
    return rep;
  }

  void embedding_grad(const Mlp& net, const Matrix& delta, const Flat& flat, const std::vector<std::size_t>& idx,
                      Vector& out) const {
    const auto d = static_cast<Eigen::Index>(config_.embedding_dim);
    const auto sw = static_cast<Eigen::Index>(enc_.state_width());
    out = Vector::Zero(static_cast<Eigen::Index>(enc_.task_count) * d);
    const auto w0 = net.weight(0);
    for (Eigen::Index b = 0; b < delta.cols(); ++b) {
      const auto task = static_cast<Eigen::Index>(flat.tasks[idx[static_cast<std::size_t>(b)]]);
      out.segment(task * d, d).noalias() += w0.middleCols(sw, d).transpose() * delta.col(b);
    }
  }

  envs::ObservationEncoder enc_;
  int actions_;
  StudentConfig config_;
  RngStream rng_;
  Mlp actor_;
  Mlp critic_;
  tensor::AdamState actor_opt_;
  tensor::AdamState critic_opt_;
  Vector actor_embed_;
  Vector critic_embed_;
  tensor::AdamState actor_embed_opt_;
  tensor::AdamState critic_embed_opt_;
};

/// Plays one episode with the stochastic policy.
inline envs::Trajectory rollout(envs::Environment& env, const StudentPolicy& policy, std::size_t task,
                                std::uint64_t seed, RngStream& rng) {
  envs::Trajectory tr;
  tr.task = task;
  tr.gamma = policy.config().gamma;
  envs::Observation obs = env.reset(task, seed);
  double discount = 1.0;
  while (!env.done()) {
    double logp = 0.0;
    const int a = policy.act(obs, rng, &logp);
    auto r = env.step(a);
    tr.steps.push_back({std::move(obs), a, r.reward, logp});
    tr.discounted_return += discount * r.reward;
    discount *= tr.gamma;
    obs = std::move(r.obs);
    if (r.done) {
      tr.success = r.success;
      tr.terminated = r.terminated;
    }
  }
  tr.final_obs = std::move(obs);
  return tr;
}

/// Evaluation-time controller: sees the environment (read-only) and the current observation.
using ActionFn = std::function<int(const envs::Environment&, const envs::Observation&)>;

inline ActionFn greedy_actor(const StudentPolicy& policy) {
  return [&policy](const envs::Environment&, const envs::Observation& obs) { return policy.act_greedy(obs); };
}

/// Replays the environment's scripted oracle plan.
inline ActionFn oracle_actor() {
  auto plan = std::make_shared<std::vector<int>>();
  return [plan](const envs::Environment& env, const envs::Observation& obs) {
    const auto t = static_cast<std::size_t>(env.steps_taken());
    if (t == 0) {
      auto p = env.oracle_plan(obs.task, env.seed());
      *plan = p ? *p : std::vector<int>{};
    }
    return t < plan->size() ? (*plan)[t] : 0;
  };
}

/// Held-out seed of evaluation episode `i` for `task`; always eval-tagged.
inline std::uint64_t eval_seed(std::uint64_t seed, std::size_t task, int i) {
  const auto raw = RngStream(seed).split("eval").split(task).split(static_cast<std::uint64_t>(i)).next_u64();
  return tagged_seed(raw, SeedTag::kEval);
}

/// Mean success of `controller` over `episodes` held-out episodes.
inline double evaluate(const envs::Environment& env, const ActionFn& controller, std::size_t task, int episodes,
                       std::uint64_t seed) {
  require(episodes >= 1, "evaluate: need at least one episode");
  auto sim = env.clone();
  int wins = 0;
  for (int i = 0; i < episodes; ++i) {
    envs::Observation obs = sim->reset(task, eval_seed(seed, task, i));
    bool success = false;
    while (!sim->done()) {
      auto r = sim->step(controller(*sim, obs));
      obs = std::move(r.obs);
      success = r.success;
    }
    wins += success;
  }
  return static_cast<double>(wins) / episodes;
}

inline double evaluate(const envs::Environment& env, const StudentPolicy& policy, std::size_t task, int episodes,
                       std::uint64_t seed) {
  return evaluate(env, greedy_actor(policy), task, episodes, seed);
}

}  // namespace hap::student

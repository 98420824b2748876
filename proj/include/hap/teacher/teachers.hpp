#pragma once

#include <deque>
#include <span>
#include <vector>

#include "hap/core/rng.hpp"
#include "hap/teacher/curriculum.hpp"
#include "hap/tensor/adam.hpp"
#include "hap/tensor/checkpoint.hpp"
#include "hap/tensor/mlp.hpp"

namespace hap::teacher {

using tensor::Matrix;
using tensor::Mlp;
using tensor::Vector;

/// Per-episode teacher rewards for a batch.
inline std::vector<double> batch_rewards(const std::vector<Episode>& batch, const CurriculumConfig& c) {
  std::vector<double> r;
  for (const auto& e : batch) r.push_back(teacher_reward(e.ret, c.clamp_eps, c.clamp_enabled));
  return r;
}

inline std::vector<std::size_t> batch_tasks(const std::vector<Episode>& batch) {
  std::vector<std::size_t> t;
  for (const auto& e : batch) t.push_back(e.task);
  return t;
}

/// One learnable logit per task; p = softmax(phi).
class LogitTeacher final : public Curriculum {
 public:
  LogitTeacher(std::size_t tasks, CurriculumConfig config, bool with_warmup = true)
      : Curriculum(tasks, std::move(config), with_warmup),
        logits_(Vector::Zero(static_cast<Eigen::Index>(tasks))),
        opt_(tasks, config_.teacher_lr) {
    refresh();
  }

  [[nodiscard]] TeacherKind kind() const override { return TeacherKind::kLogit; }
  void save_parameters(tensor::Checkpoint& ckpt) const override {
    ckpt.arrays.push_back({"teacher_logits", std::vector<double>(logits_.data(), logits_.data() + logits_.size())});
  }
  [[nodiscard]] const Vector& logits() const { return logits_; }
  [[nodiscard]] Vector& logits() { return logits_; }
  /// Recomputes the cached distribution after editing the logits directly.
  void reload() { refresh(); }

 protected:
  [[nodiscard]] Categorical raw_distribution() const override {
    return tensor::softmax(std::span<const double>(logits_.data(), static_cast<std::size_t>(logits_.size())));
  }

  UpdateStats learn(const std::vector<Episode>& batch) override {
    auto g = logit_objective_gradient(raw_distribution(), batch_tasks(batch), batch_rewards(batch, config_),
                                      config_.mean_baseline, config_.entropy_weight);
    UpdateStats s;
    s.grad_norm = g.norm();
    tensor::adam_step(logits_, -g, opt_);
    s.applied = true;
    return s;
  }

 private:
  Vector logits_;
  tensor::AdamState opt_;
};

/// p = softmax(f(h)) with f an MLP over the history feature vector.
class HistoryMlpTeacher final : public Curriculum {
 public:
  HistoryMlpTeacher(std::size_t tasks, CurriculumConfig config, RngStream rng, bool with_warmup = true)
      : Curriculum(tasks, std::move(config), with_warmup) {
    std::vector<std::size_t> sizes{3 * tasks};
    for (auto h : config_.teacher_hidden) sizes.push_back(h);
    sizes.push_back(tasks);
    net_ = Mlp::random(sizes, rng, config_.teacher_output_scale);
    opt_ = tensor::AdamState(net_.parameter_count(), config_.teacher_lr);
    refresh();
  }

  [[nodiscard]] TeacherKind kind() const override { return TeacherKind::kHistoryMlp; }
  void save_parameters(tensor::Checkpoint& ckpt) const override { ckpt.nets.push_back({"teacher", net_}); }
  [[nodiscard]] Mlp& net() { return net_; }
  [[nodiscard]] const Mlp& net() const { return net_; }
  [[nodiscard]] const std::vector<double>& cached_features() const { return features_; }
  void reload() { refresh(); }

  [[nodiscard]] std::vector<double> current_features() const {
    return history_.features(config_.feature_success, config_.feature_counts, config_.feature_returns);
  }

  /// Parameter ascent direction of the teacher objective at features `h`.
  [[nodiscard]] Vector parameter_gradient(const std::vector<double>& h, const std::vector<std::size_t>& tasks,
                                          const std::vector<double>& rewards) const {
    auto z = tensor::forward(net_, std::span<const double>(h));
    auto gz = logit_objective_gradient(tensor::softmax(z), tasks, rewards, config_.mean_baseline,
                                       config_.entropy_weight);
    return tensor::gradients(net_, h, std::span<const double>(gz.data(), static_cast<std::size_t>(gz.size())));
  }

 protected:
  [[nodiscard]] Categorical raw_distribution() const override {
    return tensor::softmax(tensor::forward(net_, std::span<const double>(features_)));
  }

  UpdateStats learn(const std::vector<Episode>& batch) override {
    // Gradient at the features that produced this batch's distribution.
    Vector g = parameter_gradient(features_, batch_tasks(batch), batch_rewards(batch, config_));
    UpdateStats s;
    s.grad_norm = g.norm();
    tensor::adam_step(net_.parameters(), -g, opt_);
    s.applied = true;
    return s;
  }

  void before_refresh() override { features_ = current_features(); }

 private:

  Mlp net_;
  tensor::AdamState opt_;
  std::vector<double> features_;
};

struct MetaTransition {
  std::vector<double> state;
  std::vector<double> action;  ///< task distribution chosen in `state`
  double reward = 0.0;
  std::vector<double> next_state;
};

/// Fixed-capacity FIFO replay buffer.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    require(capacity > 0, "replay: capacity must be positive");
  }
  void push(MetaTransition t) {
    items_.push_back(std::move(t));
    if (items_.size() > capacity_) items_.pop_front();
  }
  [[nodiscard]] std::size_t size() const { return items_.size(); }
  [[nodiscard]] std::size_t capacity() const { return capacity_; }
  [[nodiscard]] const MetaTransition& operator[](std::size_t i) const { return items_[i]; }

 private:
  std::size_t capacity_;
  std::deque<MetaTransition> items_;
};

/// Deterministic actor-critic teacher over history states: the actor maps a
/// state to task logits, the critic scores (state, task distribution) pairs.
/// Each teacher update stores one transition and, once the buffer holds a
/// batch, takes one TD step on the critic and one actor step ascending Q.
class MetaTeacher final : public Curriculum {
 public:
  MetaTeacher(std::size_t tasks, CurriculumConfig config, RngStream rng, bool with_warmup = true)
      : Curriculum(tasks, std::move(config), with_warmup), replay_(config_.replay_capacity), rng_(rng.split("replay")) {
    std::vector<std::size_t> a{3 * tasks}, c{4 * tasks};
    for (auto h : config_.teacher_hidden) {
      a.push_back(h);
      c.push_back(h);
    }
    a.push_back(tasks);
    c.push_back(1);
    RngStream ar = rng.split("actor"), cr = rng.split("critic");
    actor_ = Mlp::random(a, ar, config_.teacher_output_scale);
    critic_ = Mlp::random(c, cr);
    actor_opt_ = tensor::AdamState(actor_.parameter_count(), config_.teacher_lr);
    critic_opt_ = tensor::AdamState(critic_.parameter_count(), config_.critic_lr);
    refresh();
  }

  [[nodiscard]] TeacherKind kind() const override { return TeacherKind::kMetaAC; }
  void save_parameters(tensor::Checkpoint& ckpt) const override {
    ckpt.nets.push_back({"teacher_actor", actor_});
    ckpt.nets.push_back({"teacher_critic", critic_});
  }
  [[nodiscard]] Mlp& actor() { return actor_; }
  [[nodiscard]] Mlp& critic() { return critic_; }
  [[nodiscard]] const ReplayBuffer& replay() const { return replay_; }
  [[nodiscard]] double last_td_error() const { return last_td_; }
  void reload() { refresh(); }

  [[nodiscard]] std::vector<double> current_features() const {
    return history_.features(config_.feature_success, config_.feature_counts, config_.feature_returns);
  }

  /// Floored softmax of the actor output at state s.
  [[nodiscard]] Categorical policy(const std::vector<double>& s) const {
    return apply_floor(tensor::softmax(tensor::forward(actor_, std::span<const double>(s))), config_.p_min);
  }

  [[nodiscard]] double q_value(const std::vector<double>& s, const std::vector<double>& action) const {
    auto x = s;
    x.insert(x.end(), action.begin(), action.end());
    return tensor::forward(critic_, std::span<const double>(x))[0];
  }

  /// Stores a transition and trains when the buffer holds a batch.
  UpdateStats learn_transition(MetaTransition t) {
    replay_.push(std::move(t));
    UpdateStats s;
    if (replay_.size() < config_.replay_batch) {
      s.skipped = true;
      s.note = "replay buffer below batch size";
      return s;
    }
    std::vector<std::size_t> idx(config_.replay_batch);
    for (auto& i : idx) i = static_cast<std::size_t>(rng_.below(replay_.size()));
    critic_step(idx);
    s.grad_norm = actor_step(idx);
    s.applied = true;
    return s;
  }

 protected:
  [[nodiscard]] Categorical raw_distribution() const override {
    return tensor::softmax(tensor::forward(actor_, std::span<const double>(features_)));
  }

  UpdateStats learn(const std::vector<Episode>& batch) override {
    double mean = 0.0;
    for (const auto& e : batch) mean += e.ret;
    mean /= static_cast<double>(batch.size());
    auto next = current_features();
    MetaTransition t{features_, dist_.probs(), teacher_reward(mean, config_.clamp_eps, config_.clamp_enabled), next};
    return learn_transition(std::move(t));
  }

  void before_refresh() override { features_ = current_features(); }

 private:
  void critic_step(const std::vector<std::size_t>& idx) {
    const auto b = static_cast<Eigen::Index>(idx.size());
    const auto n = static_cast<Eigen::Index>(n_);
    Matrix x(4 * n, b);
    std::vector<double> y(idx.size());
    for (Eigen::Index j = 0; j < b; ++j) {
      const auto& t = replay_[idx[static_cast<std::size_t>(j)]];
      for (Eigen::Index k = 0; k < 3 * n; ++k) x(k, j) = t.state[static_cast<std::size_t>(k)];
      for (Eigen::Index k = 0; k < n; ++k) x(3 * n + k, j) = t.action[static_cast<std::size_t>(k)];
      y[static_cast<std::size_t>(j)] = t.reward + config_.meta_gamma * q_value(t.next_state, policy(t.next_state).probs());
    }
    tensor::MlpCache cache;
    Matrix q = tensor::forward(critic_, x, &cache);
    Matrix gq(1, b);
    double td = 0.0;
    for (Eigen::Index j = 0; j < b; ++j) {
      const double err = q(0, j) - y[static_cast<std::size_t>(j)];
      td += err * err / static_cast<double>(b);
      gq(0, j) = 2.0 * err / static_cast<double>(b);
    }
    last_td_ = td;
    Vector grads;
    tensor::backward(critic_, cache, gq, grads);
    tensor::adam_step(critic_.parameters(), grads, critic_opt_);
  }

  double actor_step(const std::vector<std::size_t>& idx) {
    const auto b = static_cast<Eigen::Index>(idx.size());
    const auto n = static_cast<Eigen::Index>(n_);
    const double scale = 1.0 - static_cast<double>(n_) * config_.p_min;
    Matrix s(3 * n, b);
    for (Eigen::Index j = 0; j < b; ++j) {
      const auto& st = replay_[idx[static_cast<std::size_t>(j)]].state;
      for (Eigen::Index k = 0; k < 3 * n; ++k) s(k, j) = st[static_cast<std::size_t>(k)];
    }
    tensor::MlpCache actor_cache;
    Matrix z = tensor::forward(actor_, s, &actor_cache);
    Matrix critic_in(4 * n, b);
    critic_in.topRows(3 * n) = s;
    std::vector<Vector> probs;
    for (Eigen::Index j = 0; j < b; ++j) {
      Vector p = (z.col(j).array() - z.col(j).maxCoeff()).exp();
      p /= p.sum();
      probs.push_back(p);
      critic_in.col(j).tail(n) = (config_.p_min + scale * p.array()).matrix();
    }
    tensor::MlpCache critic_cache;
    tensor::forward(critic_, critic_in, &critic_cache);
    Vector unused;
    Matrix din;
    tensor::backward(critic_, critic_cache, Matrix::Constant(1, b, 1.0 / static_cast<double>(b)), unused, &din);
    Matrix gz(n, b);
    for (Eigen::Index j = 0; j < b; ++j) {
      const Vector& p = probs[static_cast<std::size_t>(j)];
      Vector dc = scale * din.col(j).tail(n);  // dQ/dp through the floor
      Vector asc = p.cwiseProduct((dc.array() - p.dot(dc)).matrix());
      if (config_.entropy_weight != 0.0) {
        double h = 0.0;
        for (Eigen::Index k = 0; k < n; ++k)
          if (p(k) > 0) h -= p(k) * std::log(p(k));
        for (Eigen::Index k = 0; k < n; ++k)
          if (p(k) > 0) asc(k) -= config_.entropy_weight * p(k) * (std::log(p(k)) + h) / static_cast<double>(b);
      }
      gz.col(j) = -asc;
    }
    Vector grads;
    tensor::backward(actor_, actor_cache, gz, grads);
    const double norm = grads.norm();
    tensor::adam_step(actor_.parameters(), grads, actor_opt_);
    return norm;
  }

  Mlp actor_;
  Mlp critic_;
  tensor::AdamState actor_opt_;
  tensor::AdamState critic_opt_;
  ReplayBuffer replay_;
  RngStream rng_;
  std::vector<double> features_;
  double last_td_ = 0.0;
};

}  // namespace hap::teacher

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hap/core/rng.hpp"
#include "hap/teacher/config.hpp"
#include "hap/teacher/history.hpp"
#include "hap/tensor/categorical.hpp"
#include "hap/tensor/checkpoint.hpp"

namespace hap::teacher {

struct Episode {
  std::size_t task = 0;
  double ret = 0.0;
  bool success = false;
};

/// Outcome of one teacher update call.
struct UpdateStats {
  bool applied = false;  ///< parameters (or bandit state) changed
  bool skipped = false;  ///< nothing to learn from (empty batch, warm-up, short replay buffer)
  std::string note;
  std::size_t batch = 0;
  double mean_return = 0.0;
  double teacher_reward = 0.0;  ///< teacher_reward(mean_return)
  double grad_norm = 0.0;
};

/// Task-selection policy shared by adversarial teachers and baselines.
///
/// The distribution is cached and only recomputed at update boundaries (and,
/// for bandits, after each observed episode), so the episodes of one update
/// batch are all drawn from the distribution their gradient is evaluated at.
/// Adversarial kinds start with a round-robin warm-up during which the
/// distribution is one-hot on the scheduled task and no update is taken.
class Curriculum {
 public:
  Curriculum(std::size_t tasks, CurriculumConfig config, bool with_warmup)
      : n_(tasks),
        config_(std::move(config)),
        history_(tasks, config_.window),
        schedule_(with_warmup ? warmup_schedule(tasks, config_.warmup_episodes_per_task)
                              : std::vector<std::size_t>{}),
        dist_(Categorical::uniform(tasks)) {
    config_.validate(tasks);
  }
  virtual ~Curriculum() = default;

  [[nodiscard]] virtual TeacherKind kind() const = 0;

  [[nodiscard]] std::size_t task_count() const { return n_; }
  [[nodiscard]] const CurriculumConfig& config() const { return config_; }
  [[nodiscard]] const HistoryWindow& history() const { return history_; }
  /// True until every scheduled warm-up episode has been observed.
  [[nodiscard]] bool warmup_active() const { return pos_ < schedule_.size(); }
  [[nodiscard]] const std::vector<std::size_t>& warmup() const { return schedule_; }
  [[nodiscard]] std::size_t pending() const { return pending_.size(); }

  /// Distribution of the next sampled task (one-hot on the next scheduled task
  /// while warm-up episodes remain to be handed out).
  [[nodiscard]] Categorical distribution() const {
    if (issued_ < schedule_.size()) return Categorical::one_hot(n_, schedule_[issued_]);
    return dist_;
  }

  /// The teacher's own distribution, ignoring any remaining warm-up schedule.
  [[nodiscard]] const Categorical& policy_distribution() const { return dist_; }

  /// Hands out warm-up tasks in schedule order, then samples the distribution.
  /// With several episodes in flight the last warm-up episodes may still be
  /// running when sampling resumes; those draws use the initial distribution.
  virtual std::size_t sample_task(RngStream& rng) {
    if (issued_ < schedule_.size()) return schedule_[issued_++];
    return tensor::sample(dist_, rng);
  }

  void observe(std::size_t task, double ret, bool success) {
    require(task < n_, "curriculum: task index out of range");
    history_.push(task, ret, success);
    if (warmup_active()) {
      ++pos_;
      if (!warmup_active()) refresh();
      return;
    }
    pending_.push_back({task, ret, success});
    on_observe(task, ret, success);
  }

  /// Learns from the episodes observed since the previous update.
  UpdateStats update() {
    UpdateStats stats;
    if (warmup_active()) {
      stats.skipped = true;
      stats.note = "warm-up";
      return stats;
    }
    if (pending_.empty()) {
      stats.skipped = true;
      stats.note = "empty batch";
      return stats;
    }
    double mean = 0.0;
    for (const auto& e : pending_) mean += e.ret;
    mean /= static_cast<double>(pending_.size());
    stats = learn(pending_);
    stats.batch = pending_.size();
    stats.mean_return = mean;
    stats.teacher_reward = teacher_reward(mean, config_.clamp_eps, config_.clamp_enabled);
    pending_.clear();
    refresh();
    return stats;
  }

  /// Per-task greedy evaluation results (used by the ordered baseline).
  virtual void on_evaluation(const std::vector<double>& /*success*/) {}

  /// Appends learnable parameters to a checkpoint (no-op for parameter-free kinds).
  virtual void save_parameters(tensor::Checkpoint& /*ckpt*/) const {}

 protected:
  /// Distribution before the task window and floor.
  [[nodiscard]] virtual Categorical raw_distribution() const = 0;
  virtual UpdateStats learn(const std::vector<Episode>& batch) = 0;
  virtual void on_observe(std::size_t /*task*/, double /*ret*/, bool /*success*/) {}
  /// Runs before each distribution recompute.
  virtual void before_refresh() {}

  void refresh() {
    before_refresh();
    dist_ = apply_floor(apply_task_window(raw_distribution(), config_.task_window), config_.p_min);
  }

  std::size_t n_;
  CurriculumConfig config_;
  HistoryWindow history_;
  std::vector<std::size_t> schedule_;
  std::size_t pos_ = 0;     ///< warm-up episodes observed
  std::size_t issued_ = 0;  ///< warm-up tasks handed out
  std::vector<Episode> pending_;
  Categorical dist_;
};

/// Ascent direction of  mean_i[log p(T_i) (r_i - b)] + lambda H(p)  w.r.t. the logits,
/// where b is the batch mean of r when `baseline` is set.
inline Eigen::VectorXd logit_objective_gradient(const Categorical& p, const std::vector<std::size_t>& tasks,
                                                const std::vector<double>& rewards, bool baseline, double lambda) {
  require(!tasks.empty() && tasks.size() == rewards.size(), "teacher gradient: empty or mismatched batch");
  const auto n = static_cast<Eigen::Index>(p.size());
  double b = 0.0;
  if (baseline) {
    for (double r : rewards) b += r;
    b /= static_cast<double>(rewards.size());
  }
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const double w = (rewards[i] - b) / static_cast<double>(tasks.size());
    for (Eigen::Index k = 0; k < n; ++k) g(k) -= w * p[static_cast<std::size_t>(k)];
    g(static_cast<Eigen::Index>(tasks[i])) += w;
  }
  if (lambda != 0.0) {
    const double h = tensor::entropy(p);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double pk = p[static_cast<std::size_t>(k)];
      if (pk > 0) g(k) -= lambda * pk * (std::log(pk) + h);
    }
  }
  return g;
}

}  // namespace hap::teacher

#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <vector>

#include "hap/envs/task_space.hpp"
#include "hap/teacher/curriculum.hpp"

namespace hap::baselines {

using teacher::Categorical;
using teacher::Curriculum;
using teacher::CurriculumConfig;
using teacher::Episode;
using teacher::TeacherKind;
using teacher::UpdateStats;

inline UpdateStats no_learning(const char* note) {
  UpdateStats s;
  s.note = note;
  return s;
}

class UniformCurriculum final : public Curriculum {
 public:
  UniformCurriculum(std::size_t tasks, CurriculumConfig config) : Curriculum(tasks, std::move(config), false) {
    refresh();
  }
  [[nodiscard]] TeacherKind kind() const override { return TeacherKind::kUniform; }

 protected:
  [[nodiscard]] Categorical raw_distribution() const override { return Categorical::uniform(n_); }
  UpdateStats learn(const std::vector<Episode>&) override { return no_learning("fixed policy"); }
};

/// Task indices sorted by tier, ties kept in task order.
inline std::vector<std::size_t> tier_order(const envs::TaskSpace& space) {
  std::vector<std::size_t> order(space.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return static_cast<int>(space.tier(a)) < static_cast<int>(space.tier(b));
  });
  return order;
}

/// Easy-to-hard curriculum: all mass on the first task (in tier order) whose
/// greedy evaluation success is below the threshold. The pointer never moves back.
class OrderedCurriculum final : public Curriculum {
 public:
  OrderedCurriculum(std::vector<std::size_t> order, CurriculumConfig config)
      : Curriculum(order.size(), std::move(config), false), order_(std::move(order)) {
    std::vector<bool> seen(n_, false);
    for (auto t : order_) {
      require(t < n_ && !seen[t], "ordered curriculum: order must be a permutation");
      seen[t] = true;
    }
    refresh();
  }
  OrderedCurriculum(const envs::TaskSpace& space, CurriculumConfig config)
      : OrderedCurriculum(tier_order(space), std::move(config)) {}

  [[nodiscard]] TeacherKind kind() const override { return TeacherKind::kOrdered; }
  [[nodiscard]] std::size_t current_task() const { return order_[pointer_]; }
  [[nodiscard]] std::size_t pointer() const { return pointer_; }

  void on_evaluation(const std::vector<double>& success) override {
    require(success.size() == n_, "ordered curriculum: success vector size mismatch");
    while (pointer_ + 1 < n_ && success[order_[pointer_]] >= config_.ordered_threshold) ++pointer_;
    refresh();
  }

 protected:
  [[nodiscard]] Categorical raw_distribution() const override { return Categorical::one_hot(n_, order_[pointer_]); }
  UpdateStats learn(const std::vector<Episode>&) override { return no_learning("advances on evaluation"); }

 private:
  std::vector<std::size_t> order_;
  std::size_t pointer_ = 0;
};

/// EXP3 over tasks with weights kept in log space (shifted so the largest is 0).
class Exp3Curriculum final : public Curriculum {
 public:
  Exp3Curriculum(std::size_t tasks, CurriculumConfig config)
      : Curriculum(tasks, std::move(config), false), log_w_(tasks, 0.0) {
    refresh();
  }

  [[nodiscard]] TeacherKind kind() const override { return TeacherKind::kExp3; }
  [[nodiscard]] const std::vector<double>& log_weights() const { return log_w_; }

  /// Affine map of a student return onto [0, 1].
  [[nodiscard]] double rescale(double ret) const {
    double r = (ret - config_.return_low) / (config_.return_high - config_.return_low);
    require(r >= -1e-9 && r <= 1.0 + 1e-9, "exp3: reward outside [0, 1] after rescaling");
    return std::clamp(r, 0.0, 1.0);
  }

  /// Importance-weighted update of the selected arm with a reward already in [0, 1].
  void update_arm(std::size_t task, double reward) {
    require(reward >= 0.0 && reward <= 1.0, "exp3: reward outside [0, 1]");
    const double p = dist_[task];
    log_w_[task] += config_.exp3_gamma * (reward / p) / static_cast<double>(n_);
    const double top = *std::max_element(log_w_.begin(), log_w_.end());
    for (auto& w : log_w_) w -= top;
    refresh();
  }

 protected:
  [[nodiscard]] Categorical raw_distribution() const override {
    const double top = *std::max_element(log_w_.begin(), log_w_.end());
    double total = 0.0;
    std::vector<double> p(n_);
    for (std::size_t i = 0; i < n_; ++i) total += p[i] = std::exp(log_w_[i] - top);
    const double g = config_.exp3_gamma;
    for (auto& v : p) v = (1.0 - g) * v / total + g / static_cast<double>(n_);
    return Categorical(std::move(p));
  }
  void on_observe(std::size_t task, double ret, bool) override { update_arm(task, rescale(ret)); }
  UpdateStats learn(const std::vector<Episode>&) override { return no_learning("per-episode updates"); }

 private:
  std::vector<double> log_w_;
};

/// Least-squares slope of y against 0..k-1.
inline double ls_slope(const std::deque<double>& y) {
  const std::size_t k = y.size();
  require(k >= 2, "ls_slope: need at least two points");
  const double xm = static_cast<double>(k - 1) / 2.0;
  double ym = 0.0;
  for (double v : y) ym += v;
  ym /= static_cast<double>(k);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double dx = static_cast<double>(i) - xm;
    sxy += dx * (y[i] - ym);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

/// Learning-progress teacher: priority |slope| of each task's last m returns,
/// epsilon-greedy with the greedy mass split evenly over tied maxima.
class TsclCurriculum final : public Curriculum {
 public:
  TsclCurriculum(std::size_t tasks, CurriculumConfig config)
      : Curriculum(tasks, std::move(config), false), returns_(tasks) {
    refresh();
  }

  [[nodiscard]] TeacherKind kind() const override { return TeacherKind::kTscl; }

  /// +infinity for tasks with fewer than two recorded returns.
  [[nodiscard]] std::vector<double> priorities() const {
    std::vector<double> pr(n_);
    for (std::size_t t = 0; t < n_; ++t)
      pr[t] = returns_[t].size() < 2 ? std::numeric_limits<double>::infinity() : std::abs(ls_slope(returns_[t]));
    return pr;
  }

 protected:
  [[nodiscard]] Categorical raw_distribution() const override {
    auto pr = priorities();
    const double top = *std::max_element(pr.begin(), pr.end());
    std::size_t ties = 0;
    for (double v : pr) ties += v == top ? 1 : 0;
    const double e = config_.tscl_eps;
    std::vector<double> p(n_, e / static_cast<double>(n_));
    for (std::size_t t = 0; t < n_; ++t)
      if (pr[t] == top) p[t] += (1.0 - e) / static_cast<double>(ties);
    return Categorical(std::move(p));
  }
  void on_observe(std::size_t task, double ret, bool) override {
    auto& q = returns_[task];
    q.push_back(ret);
    if (q.size() > config_.tscl_window) q.pop_front();
    refresh();
  }
  UpdateStats learn(const std::vector<Episode>&) override { return no_learning("per-episode updates"); }

 private:
  std::vector<std::deque<double>> returns_;
};

}  // namespace hap::baselines

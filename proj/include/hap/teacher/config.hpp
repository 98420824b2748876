#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "hap/core/error.hpp"
#include "hap/tensor/categorical.hpp"

namespace hap::teacher {

using tensor::Categorical;

enum class TeacherKind { kUniform, kOrdered, kExp3, kTscl, kLogit, kHistoryMlp, kMetaAC };

inline std::string kind_name(TeacherKind k) {
  switch (k) {
    case TeacherKind::kUniform: return "uniform";
    case TeacherKind::kOrdered: return "ordered";
    case TeacherKind::kExp3: return "exp3";
    case TeacherKind::kTscl: return "tscl";
    case TeacherKind::kLogit: return "logit";
    case TeacherKind::kHistoryMlp: return "history_mlp";
    case TeacherKind::kMetaAC: return "meta_ac";
  }
  return "?";
}

inline TeacherKind parse_kind(const std::string& s) {
  for (auto k : {TeacherKind::kUniform, TeacherKind::kOrdered, TeacherKind::kExp3, TeacherKind::kTscl,
                 TeacherKind::kLogit, TeacherKind::kHistoryMlp, TeacherKind::kMetaAC})
    if (kind_name(k) == s) return k;
  throw ConfigError("unknown teacher kind '" + s + "'");
}

/// Adversarial teachers learn; the rest are fixed or bandit baselines.
inline bool is_adversarial(TeacherKind k) {
  return k == TeacherKind::kLogit || k == TeacherKind::kHistoryMlp || k == TeacherKind::kMetaAC;
}

struct CurriculumConfig {
  double entropy_weight = 0.1;  ///< lambda
  double p_min = 0.02;
  int warmup_episodes_per_task = 50;
  double clamp_eps = 0.05;
  bool clamp_enabled = false;
  double teacher_lr = 1e-4;  ///< beta
  std::size_t window = 100;  ///< W
  int update_every = 32;         ///< episodes between teacher updates
  int update_every_steps = 0;    ///< if > 0, update at the first episode boundary after this many steps instead
  std::size_t task_window = 0;   ///< top-k support before flooring; 0 = off
  bool mean_baseline = true;
  bool feature_success = true;
  bool feature_counts = true;
  bool feature_returns = true;
  std::vector<std::size_t> teacher_hidden{256, 128};
  double teacher_output_scale = 0.01;
  // Meta actor-critic.
  std::size_t replay_capacity = 1000;
  std::size_t replay_batch = 32;
  double meta_gamma = 0.9;
  double critic_lr = 1e-3;
  // Baselines.
  double ordered_threshold = 0.8;
  double exp3_gamma = 0.1;
  std::size_t tscl_window = 10;
  double tscl_eps = 0.1;
  /// Student return range used to rescale EXP3 rewards to [0, 1]; the harness
  /// sets the lower end to -step_cap * step_penalty.
  double return_low = -1.0;
  double return_high = 1.0;

  /// Range checks for a task space of size n.
  void validate(std::size_t n) const {
    if (n == 0) throw ConfigError("curriculum: empty task space");
    if (!(entropy_weight >= 0)) throw ConfigError("curriculum: entropy weight must be >= 0");
    if (!(p_min >= 0) || p_min * static_cast<double>(n) >= 1.0)
      throw ConfigError("curriculum: p_min must satisfy 0 <= p_min < 1/|tasks|");
    if (warmup_episodes_per_task < 0) throw ConfigError("curriculum: warm-up episodes must be >= 0");
    if (!(clamp_eps > 0 && clamp_eps <= 1)) throw ConfigError("curriculum: clamp epsilon must lie in (0, 1]");
    if (!(teacher_lr > 0)) throw ConfigError("curriculum: teacher learning rate must be positive");
    if (window == 0) throw ConfigError("curriculum: history window must be positive");
    if (update_every < 1) throw ConfigError("curriculum: update_every must be >= 1");
    if (update_every_steps < 0) throw ConfigError("curriculum: update_every_steps must be >= 0");
    if (replay_batch == 0 || replay_capacity < replay_batch)
      throw ConfigError("curriculum: replay capacity must be >= replay batch > 0");
    if (!(exp3_gamma > 0 && exp3_gamma <= 1)) throw ConfigError("curriculum: exp3 gamma must lie in (0, 1]");
    if (!(tscl_eps >= 0 && tscl_eps <= 1)) throw ConfigError("curriculum: tscl epsilon must lie in [0, 1]");
    if (!(return_low < return_high)) throw ConfigError("curriculum: return_low must be < return_high");
    if (tscl_window < 2) throw ConfigError("curriculum: tscl window must be >= 2");
    if (!(ordered_threshold >= 0 && ordered_threshold <= 1))
      throw ConfigError("curriculum: ordered threshold must lie in [0, 1]");
  }
};

/// out[i] = p_min + (1 - n p_min) dist[i].
inline Categorical apply_floor(const Categorical& dist, double p_min) {
  const double n = static_cast<double>(dist.size());
  if (!(p_min >= 0) || p_min * n >= 1.0) throw ConfigError("apply_floor: infeasible p_min");
  if (p_min == 0.0) return dist;
  std::vector<double> out(dist.size());
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) total += out[i] = p_min + (1.0 - n * p_min) * dist[i];
  for (auto& v : out) v /= total;
  return Categorical(std::move(out));
}

/// Keeps the k most probable tasks (ties to the lower index) and renormalises; k = 0 or k >= n is identity.
inline Categorical apply_task_window(const Categorical& dist, std::size_t k) {
  if (k == 0 || k >= dist.size()) return dist;
  std::vector<std::size_t> order(dist.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
  std::vector<double> out(dist.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) total += out[order[i]] = dist[order[i]];
  if (total <= 0.0) return Categorical::uniform(dist.size());
  for (auto& v : out) v /= total;
  return Categorical(std::move(out));
}

/// Teacher reward for a (mean) student return: -r, or the clamped piecewise form.
inline double teacher_reward(double student_return, double eps, bool clamp_enabled) {
  require(std::isfinite(student_return), "teacher_reward: non-finite student return");
  if (!clamp_enabled) return -student_return;
  if (student_return == 0.0 || student_return <= 1.0 - eps) return 0.0;
  return -student_return;
}

/// Round-robin warm-up: every task exactly k times in task order.
inline std::vector<std::size_t> warmup_schedule(std::size_t tasks, int k) {
  require(k >= 0, "warmup_schedule: k must be >= 0");
  std::vector<std::size_t> out;
  for (int r = 0; r < k; ++r)
    for (std::size_t t = 0; t < tasks; ++t) out.push_back(t);
  return out;
}

}  // namespace hap::teacher

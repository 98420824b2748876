#pragma once

// Run directory layout:
//   config.resolved     every spec key with its value (re-loadable spec file)
//   metrics.csv         one row per episode and per evaluation (deterministic)
//   teacher_trace.csv   one row per teacher update call after warm-up (deterministic)
//   timing.csv          wall-clock seconds at each evaluation
//   checkpoint.txt      final student (and teacher) parameters
//   checkpoint_<step>.txt  periodic checkpoints when run.checkpoint_every > 0
//   summary.json        final success, steps-to-threshold, invariant counters

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hap/core/rng.hpp"
#include "hap/envs/registry.hpp"
#include "hap/harness/csv.hpp"
#include "hap/harness/factory.hpp"
#include "hap/harness/spec.hpp"
#include "hap/student/policy.hpp"
#include "hap/tensor/checkpoint.hpp"

namespace hap::harness {

inline constexpr const char* kMetricsVersion = "# hap metrics v1";
inline constexpr const char* kTraceVersion = "# hap teacher trace v1";

struct EvalPoint {
  std::int64_t step = 0;
  std::int64_t episode = 0;
  std::vector<double> probs;    ///< teacher's own distribution at evaluation time (warm-up schedule ignored)
  std::vector<double> success;  ///< greedy success per task
};

struct TraceRow {
  std::int64_t step = 0;
  std::int64_t episode = 0;
  teacher::UpdateStats stats;
  std::vector<double> probs;
  double entropy = 0.0;
};

struct InvariantCounters {
  std::size_t checked = 0;
  std::size_t sum_violations = 0;
  std::size_t floor_violations = 0;
  std::size_t entropy_violations = 0;
  [[nodiscard]] std::size_t total() const { return sum_violations + floor_violations + entropy_violations; }
};

struct RunResult {
  std::uint64_t seed = 0;
  std::vector<std::string> task_names;
  std::int64_t steps = 0;
  std::int64_t episodes = 0;
  std::int64_t length_sum = 0;        ///< steps of finished episodes
  std::int64_t unfinished_steps = 0;  ///< steps of episodes cut by the budget; adds up with length_sum to `steps`
  std::size_t student_updates = 0;
  std::vector<EvalPoint> evals;
  std::vector<TraceRow> trace;
  InvariantCounters invariants;
  double wall_seconds = 0.0;

  /// First evaluation step at which task `t` reached `threshold`.
  [[nodiscard]] std::optional<std::int64_t> steps_to(std::size_t t, double threshold) const {
    for (const auto& e : evals)
      if (e.success[t] >= threshold) return e.step;
    return std::nullopt;
  }

  /// First evaluation step at which every task reached `threshold`.
  [[nodiscard]] std::optional<std::int64_t> steps_to_all(double threshold) const {
    for (const auto& e : evals) {
      bool all = true;
      for (double s : e.success) all = all && s >= threshold;
      if (all) return e.step;
    }
    return std::nullopt;
  }

  [[nodiscard]] const std::vector<double>& final_success() const { return evals.back().success; }
};

/// Checks one logged distribution against the sum, floor and entropy invariants.
inline void check_distribution(const tensor::Categorical& d, double p_min, InvariantCounters& c) {
  ++c.checked;
  double sum = 0.0;
  for (double p : d.probs()) sum += p;
  if (std::abs(sum - 1.0) > 1e-9) ++c.sum_violations;
  if (d.min() < p_min - 1e-12) ++c.floor_violations;
  if (tensor::entropy(d) > std::log(static_cast<double>(d.size())) + 1e-12) ++c.entropy_violations;
}

namespace detail {

inline std::vector<std::string> metrics_header(const std::vector<std::string>& tasks) {
  std::vector<std::string> h{"event", "step", "episode", "task", "return", "success", "length", "entropy"};
  for (const auto& t : tasks) h.push_back("p_" + t);
  for (const auto& t : tasks) h.push_back("eval_" + t);
  return h;
}

inline std::vector<std::string> trace_header(const std::vector<std::string>& tasks) {
  std::vector<std::string> h{"step",           "episode",   "kind",    "applied", "batch", "mean_return",
                             "teacher_reward", "grad_norm", "entropy"};
  for (const auto& t : tasks) h.push_back("p_" + t);
  h.push_back("note");
  return h;
}

}  // namespace detail

/// Optional per-evaluation callback (progress printing).
using EvalCallback = std::function<void(const EvalPoint&)>;

/// Executes one seed of an experiment. When `dir` is non-empty the run
/// directory files are written there.
inline RunResult run_experiment(const ExperimentSpec& spec, std::uint64_t seed, const std::string& dir = "",
                                const EvalCallback& on_eval = {}) {
  spec.validate();
  const auto started = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };

  auto env = envs::make_environment(spec.env);
  const auto& space = env->tasks();
  const std::size_t n = space.size();
  spec.curriculum.validate(n);

  RunResult result;
  result.seed = seed;
  for (std::size_t t = 0; t < n; ++t) result.task_names.push_back(space.name(t));

  const RngStream root(seed);
  student::StudentPolicy policy(env->encoder(), env->action_count(), spec.student, root.split("student"));
  auto curriculum = make_curriculum(spec.teacher, space, spec.curriculum, root.split("teacher"));
  RngStream task_rng = root.split("tasks");
  RngStream action_rng = root.split("actions");
  const RngStream episode_seeds = root.split("episodes");

  std::ofstream metrics, trace, timing;
  if (!dir.empty()) {
    std::filesystem::create_directories(dir);
    std::ofstream(dir + "/config.resolved") << resolved_text(spec);
    metrics.open(dir + "/metrics.csv");
    trace.open(dir + "/teacher_trace.csv");
    timing.open(dir + "/timing.csv");
    metrics << kMetricsVersion << '\n' << join_row(detail::metrics_header(result.task_names)) << '\n';
    trace << kTraceVersion << '\n' << join_row(detail::trace_header(result.task_names)) << '\n';
    timing << "step,wall_seconds\n";
  }

  auto probs_cells = [&](const tensor::Categorical& d, std::vector<std::string>& row) {
    for (double p : d.probs()) row.push_back(fmt(p));
  };

  auto save_checkpoint = [&](const std::string& path) {
    auto ckpt = policy.to_checkpoint(seed);
    curriculum->save_parameters(ckpt);
    tensor::save_checkpoint(path, ckpt);
  };

  auto run_eval = [&](std::int64_t step, std::int64_t episode) {
    EvalPoint e;
    e.step = step;
    e.episode = episode;
    const auto d = curriculum->policy_distribution();
    e.probs = d.probs();
    for (std::size_t t = 0; t < n; ++t)
      e.success.push_back(student::evaluate(*env, policy, t, spec.run.eval_episodes, seed));
    curriculum->on_evaluation(e.success);
    if (metrics.is_open()) {
      std::vector<std::string> row{"eval", std::to_string(step), std::to_string(episode), "", "", "", "",
                                   fmt(tensor::entropy(d))};
      probs_cells(d, row);
      for (double s : e.success) row.push_back(fmt(s));
      metrics << join_row(row) << '\n';
      timing << step << ',' << fmt(elapsed()) << '\n';
    }
    result.evals.push_back(e);
    if (on_eval) on_eval(e);
  };

  // One stream per in-flight episode; whole-episode mode uses a single stream.
  struct Stream {
    std::unique_ptr<envs::Environment> env;
    envs::Observation obs;
    envs::Trajectory segment;
    bool active = false;
    bool warm = false;
    std::size_t task = 0;
    std::vector<double> probs;
    double entropy = 0.0;
    double ret = 0.0;
    double discount = 1.0;
    std::int64_t length = 0;
  };
  const bool segmented = spec.run.segment_steps > 0;
  std::vector<Stream> streams(segmented ? static_cast<std::size_t>(spec.run.batch_episodes) : 1);
  for (auto& s : streams) s.env = env->clone();
  const double gamma = spec.student.gamma;

  std::int64_t step = 0, episode = 0, episodes_started = 0;
  std::int64_t next_eval = 0, next_checkpoint = spec.run.checkpoint_every;
  std::vector<envs::Trajectory> batch;
  std::int64_t batch_steps = 0;
  std::int64_t teacher_episodes = 0, teacher_steps = 0;

  auto fresh_segment = [&](std::size_t task) {
    envs::Trajectory tr;
    tr.task = task;
    tr.gamma = gamma;
    return tr;
  };

  auto start_episode = [&](Stream& s) {
    const auto d = curriculum->distribution();
    s.warm = curriculum->warmup_active();
    s.task = curriculum->sample_task(task_rng);
    s.probs = d.probs();
    s.entropy = tensor::entropy(d);
    const auto ep_seed =
        tagged_seed(episode_seeds.split(static_cast<std::uint64_t>(episodes_started++)).next_u64(), SeedTag::kTrain);
    require(seed_tag(ep_seed) == SeedTag::kTrain, "training episode drew an evaluation seed");
    s.obs = s.env->reset(s.task, ep_seed);
    s.segment = fresh_segment(s.task);
    s.ret = 0.0;
    s.discount = 1.0;
    s.length = 0;
    s.active = true;
  };

  auto student_update = [&] {
    policy.update(batch);
    ++result.student_updates;
    batch.clear();
    batch_steps = 0;
  };

  auto teacher_update = [&] {
    auto stats = curriculum->update();
    if (!spec.curriculum.clamp_enabled && stats.batch > 0)
      require(stats.teacher_reward == -stats.mean_return, "teacher reward is not the negated student return");
    const auto d = curriculum->distribution();
    check_distribution(d, spec.curriculum.p_min, result.invariants);
    TraceRow tr_row{step, episode, stats, d.probs(), tensor::entropy(d)};
    if (trace.is_open()) {
      std::vector<std::string> row{std::to_string(step),
                                   std::to_string(episode),
                                   teacher::kind_name(curriculum->kind()),
                                   stats.applied ? "1" : "0",
                                   std::to_string(stats.batch),
                                   fmt(stats.mean_return),
                                   fmt(stats.teacher_reward),
                                   fmt(stats.grad_norm),
                                   fmt(tr_row.entropy)};
      probs_cells(d, row);
      row.push_back(field(stats.note));
      trace << join_row(row) << '\n';
    }
    result.trace.push_back(std::move(tr_row));
    teacher_episodes = teacher_steps = 0;
  };

  auto finish_episode = [&](Stream& s, bool success) {
    ++episode;
    result.length_sum += s.length;
    curriculum->observe(s.task, s.ret, success);
    if (metrics.is_open()) {
      std::vector<std::string> row{"episode",
                                   std::to_string(step),
                                   std::to_string(episode),
                                   result.task_names[s.task],
                                   fmt(s.ret),
                                   success ? "1" : "0",
                                   std::to_string(s.length),
                                   fmt(s.entropy)};
      for (double p : s.probs) row.push_back(fmt(p));
      for (std::size_t t = 0; t < n; ++t) row.push_back("");
      metrics << join_row(row) << '\n';
    }
    s.active = false;
    if (s.warm || curriculum->warmup_active()) return;
    ++teacher_episodes;
    teacher_steps += s.length;
    const bool due = spec.curriculum.update_every_steps > 0 ? teacher_steps >= spec.curriculum.update_every_steps
                                                            : teacher_episodes >= spec.curriculum.update_every;
    if (due) teacher_update();
  };

  try {
    run_eval(0, 0);
    next_eval = spec.run.eval_every;
    int round = 0;
    while (step < spec.run.total_steps) {
      for (auto& s : streams) {
        if (step >= spec.run.total_steps) break;
        if (!s.active) start_episode(s);
        double logp = 0.0;
        const int action = policy.act(s.obs, action_rng, &logp);
        auto r = s.env->step(action);
        s.segment.steps.push_back({std::move(s.obs), action, r.reward, logp});
        s.segment.discounted_return += s.discount * r.reward;
        s.ret += s.discount * r.reward;
        s.discount *= gamma;
        s.obs = std::move(r.obs);
        ++s.length;
        ++step;
        ++batch_steps;
        if (r.done) {
          s.segment.success = r.success;
          s.segment.terminated = r.terminated;
          s.segment.final_obs = s.obs;
          batch.push_back(std::move(s.segment));
          finish_episode(s, r.success);
          if (!segmented && (static_cast<int>(batch.size()) >= spec.run.batch_episodes ||
                             (spec.run.batch_steps > 0 && batch_steps >= spec.run.batch_steps)))
            student_update();
        }
        if (step >= next_eval) {
          run_eval(step, episode);
          while (next_eval <= step) next_eval += spec.run.eval_every;
        }
        if (!dir.empty() && spec.run.checkpoint_every > 0 && step >= next_checkpoint) {
          save_checkpoint(dir + "/checkpoint_" + std::to_string(step) + ".txt");
          while (next_checkpoint <= step) next_checkpoint += spec.run.checkpoint_every;
        }
      }
      if (segmented && ++round == spec.run.segment_steps) {
        // Cut every running episode; its segment bootstraps from the critic.
        for (auto& s : streams) {
          if (!s.active || s.segment.steps.empty()) continue;
          s.segment.final_obs = s.obs;
          batch.push_back(std::exchange(s.segment, fresh_segment(s.task)));
        }
        if (!batch.empty()) student_update();
        round = 0;
      }
    }
    for (const auto& s : streams)
      if (s.active) result.unfinished_steps += s.length;
    if (result.evals.back().step != step) run_eval(step, episode);
  } catch (const std::exception& e) {
    if (metrics.is_open()) {
      std::vector<std::string> row{"error", std::to_string(step), std::to_string(episode), "", "", "", "",
                                   field(e.what())};
      row.resize(detail::metrics_header(result.task_names).size());
      metrics << join_row(row) << '\n';
    }
    throw;
  }

  result.steps = step;
  result.episodes = episode;
  result.wall_seconds = elapsed();

  if (!dir.empty()) {
    save_checkpoint(dir + "/checkpoint.txt");
    nlohmann::json j;
    j["name"] = spec.name;
    j["seed"] = seed;
    j["env"] = spec.env.id;
    j["teacher"] = teacher::kind_name(spec.teacher);
    j["steps"] = result.steps;
    j["episodes"] = result.episodes;
    j["student_updates"] = result.student_updates;
    j["tasks"] = result.task_names;
    j["final_success"] = result.final_success();
    j["threshold"] = spec.run.threshold;
    auto all = result.steps_to_all(spec.run.threshold);
    j["steps_to_all"] = all ? nlohmann::json(*all) : nlohmann::json(nullptr);
    nlohmann::json per = nlohmann::json::object();
    for (std::size_t t = 0; t < n; ++t) {
      auto s = result.steps_to(t, spec.run.threshold);
      per[result.task_names[t]] = s ? nlohmann::json(*s) : nlohmann::json(nullptr);
    }
    j["steps_to_threshold"] = per;
    j["invariant_checks"] = result.invariants.checked;
    j["invariant_violations"] = result.invariants.total();
    j["wall_seconds"] = result.wall_seconds;
    std::ofstream(dir + "/summary.json") << j.dump(2) << '\n';
  }
  return result;
}

/// Loads a finished run directory and re-evaluates its final checkpoint.
inline std::vector<double> evaluate_sweep(const std::string& dir, int episodes = 0) {
  const auto spec = load_spec(dir + "/config.resolved");
  const auto ckpt = tensor::load_checkpoint(dir + "/checkpoint.txt");
  auto env = envs::make_environment(spec.env);
  student::StudentPolicy policy(env->encoder(), env->action_count(), spec.student, RngStream(ckpt.seed));
  policy.load_checkpoint(ckpt);
  const int eps = episodes > 0 ? episodes : spec.run.eval_episodes;
  std::vector<double> out;
  for (std::size_t t = 0; t < env->tasks().size(); ++t)
    out.push_back(student::evaluate(*env, policy, t, eps, ckpt.seed));
  return out;
}

}  // namespace hap::harness

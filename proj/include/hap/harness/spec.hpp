#pragma once

// Experiment spec files are flat `section.key = value` lines; `#` starts a
// comment. Lists are comma separated. Unknown keys are errors. Values not
// given fall back to the per-environment defaults of `defaults_for`.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "hap/core/error.hpp"
#include "hap/envs/registry.hpp"
#include "hap/student/policy.hpp"
#include "hap/teacher/config.hpp"

namespace hap::harness {

struct RunSettings {
  std::int64_t total_steps = 50000;
  std::int64_t eval_every = 2000;
  int eval_episodes = 10;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::int64_t checkpoint_every = 0;  ///< 0 = final checkpoint only
  int batch_episodes = 32;            ///< trajectories per student update
  std::int64_t batch_steps = 0;       ///< whole-episode mode: also update once this many steps are collected
  int segment_steps = 0;              ///< > 0: batch_episodes parallel streams cut into segments of this length
  double threshold = 0.9;             ///< success level for steps-to-threshold
};

struct ExperimentSpec {
  std::string name = "run";
  envs::EnvOptions env;
  teacher::TeacherKind teacher = teacher::TeacherKind::kLogit;
  teacher::CurriculumConfig curriculum;
  student::StudentConfig student;
  RunSettings run;

  /// Range checks that need no environment.
  void validate() const {
    if (run.total_steps <= 0) throw ConfigError("run.total_steps must be positive");
    if (run.eval_every <= 0) throw ConfigError("run.eval_every must be positive");
    if (run.eval_episodes < 1) throw ConfigError("run.eval_episodes must be >= 1");
    if (run.seeds.empty()) throw ConfigError("run.seeds must not be empty");
    if (run.batch_episodes < 1) throw ConfigError("student.batch_episodes must be >= 1");
    if (run.batch_steps < 0 || run.checkpoint_every < 0 || run.segment_steps < 0)
      throw ConfigError("step counts must be >= 0");
    if (!(run.threshold > 0 && run.threshold <= 1)) throw ConfigError("run.threshold must lie in (0, 1]");
  }
};

/// Defaults taken from each environment's hyperparameter table.
inline ExperimentSpec defaults_for(const std::string& env_id) {
  ExperimentSpec s;
  s.env.id = env_id;
  auto& c = s.curriculum;
  auto& st = s.student;
  if (env_id == "nav") {
    s.teacher = teacher::TeacherKind::kLogit;
    st.algo = student::StudentAlgo::kA2C;
    st.policy_lr = st.value_lr = 1e-4;
    st.actor_output_scale = 1.0;
    c.teacher_lr = 0.05;
    c.update_every_steps = 1000;
    c.task_window = 4;
    s.env.step_cap = 200;
    s.run.total_steps = 50000;
    s.run.segment_steps = 1;
  } else if (env_id == "minigrid") {
    s.teacher = teacher::TeacherKind::kHistoryMlp;
    st.algo = student::StudentAlgo::kPPO;
    st.policy_lr = 3e-4;
    st.value_lr = 1e-3;
    c.teacher_lr = 1e-3;
    c.update_every = 100;
    c.task_window = 6;
    st.actor_output_scale = 1.0;
    s.env.step_cap = 200;
    s.env.size = 7;
    s.env.rooms = 2;
    s.run.total_steps = 200000;
    s.run.segment_steps = 16;
    s.run.eval_every = 10000;
  } else if (env_id == "craft") {
    s.teacher = teacher::TeacherKind::kHistoryMlp;
    st.algo = student::StudentAlgo::kPPO;
    st.hidden = {512, 256, 256, 128};
    st.policy_lr = st.value_lr = 1e-4;
    c.teacher_hidden = {512, 256, 128, 128};
    c.teacher_lr = 1e-4;
    c.update_every = 50;
    c.task_window = 12;
    s.env.step_cap = 1000;
    s.run.batch_episodes = 128;
    s.run.total_steps = 200000;
    s.run.eval_every = 10000;
  } else {
    throw ConfigError("unknown environment '" + env_id + "'");
  }
  return s;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  T x{};
  in >> x;
  if (in.fail() || !in.eof()) throw ConfigError("config: bad value '" + v + "' for " + key);
  return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: bad boolean '" + v + "' for " + key);
}

inline std::string format_double(double x) {
  std::ostringstream out;
  out.precision(17);
  out << x;
  return out.str();
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::ostringstream out;
  for (std::size_t i = 0; i < xs.size(); ++i) out << (i ? "," : "") << xs[i];
  return out.str();
}

struct Binding {
  std::string key;
  std::function<std::string(const ExperimentSpec&)> get;
  std::function<void(ExperimentSpec&, const std::string&)> set;
};

// Bindings from a mutable member accessor; getters reuse it on a const spec.
template <class Access>
Binding num_binding(std::string key, Access access) {
  using T = std::remove_reference_t<decltype(access(std::declval<ExperimentSpec&>()))>;
  return {key,
          [access](const ExperimentSpec& s) {
            auto& m = access(const_cast<ExperimentSpec&>(s));
            if constexpr (std::is_floating_point_v<T>) return format_double(m);
            else return std::to_string(m);
          },
          [access, key](ExperimentSpec& s, const std::string& v) { access(s) = parse_number<T>(key, v); }};
}

template <class Access>
Binding bool_binding(std::string key, Access access) {
  return {key, [access](const ExperimentSpec& s) { return std::string(access(const_cast<ExperimentSpec&>(s)) ? "true" : "false"); },
          [access, key](ExperimentSpec& s, const std::string& v) { access(s) = parse_bool(key, v); }};
}

template <class Access>
Binding sizes_binding(std::string key, Access access) {
  return {key, [access](const ExperimentSpec& s) { return join(access(const_cast<ExperimentSpec&>(s))); },
          [access, key](ExperimentSpec& s, const std::string& v) {
            std::vector<std::size_t> out;
            for (const auto& item : split_list(v)) out.push_back(parse_number<std::size_t>(key, item));
            access(s) = out;
          }};
}

#define HAP_NUM(k, expr) num_binding(k, [](ExperimentSpec& s) -> auto& { return expr; })
#define HAP_BOOL(k, expr) bool_binding(k, [](ExperimentSpec& s) -> auto& { return expr; })
#define HAP_SIZES(k, expr) sizes_binding(k, [](ExperimentSpec& s) -> auto& { return expr; })

inline const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = [] {
    std::vector<Binding> b;
    b.push_back({"name", [](const ExperimentSpec& s) { return s.name; },
                 [](ExperimentSpec& s, const std::string& v) { s.name = v; }});
    b.push_back({"env.id", [](const ExperimentSpec& s) { return s.env.id; },
                 [](ExperimentSpec& s, const std::string& v) { s.env.id = v; }});
    b.push_back({"env.tasks", [](const ExperimentSpec& s) { return join(s.env.tasks); },
                 [](ExperimentSpec& s, const std::string& v) { s.env.tasks = split_list(v); }});
    b.push_back(HAP_NUM("env.size", s.env.size));
    b.push_back(HAP_NUM("env.step_cap", s.env.step_cap));
    b.push_back(HAP_NUM("env.step_penalty", s.env.step_penalty));
    b.push_back(HAP_NUM("env.success_reward", s.env.success_reward));
    b.push_back(HAP_NUM("env.rooms", s.env.rooms));
    b.push_back(HAP_BOOL("env.egocentric", s.env.egocentric));
    b.push_back(HAP_NUM("env.barrier_spacing", s.env.barrier_spacing));
    b.push_back(HAP_SIZES("env.lengths", s.env.lengths));

    b.push_back({"teacher.kind", [](const ExperimentSpec& s) { return teacher::kind_name(s.teacher); },
                 [](ExperimentSpec& s, const std::string& v) { s.teacher = teacher::parse_kind(v); }});
    b.push_back(HAP_NUM("teacher.entropy_weight", s.curriculum.entropy_weight));
    b.push_back(HAP_NUM("teacher.p_min", s.curriculum.p_min));
    b.push_back(HAP_NUM("teacher.warmup_episodes_per_task", s.curriculum.warmup_episodes_per_task));
    b.push_back(HAP_NUM("teacher.clamp_eps", s.curriculum.clamp_eps));
    b.push_back(HAP_BOOL("teacher.clamp_enabled", s.curriculum.clamp_enabled));
    b.push_back(HAP_NUM("teacher.lr", s.curriculum.teacher_lr));
    b.push_back(HAP_NUM("teacher.window", s.curriculum.window));
    b.push_back(HAP_NUM("teacher.update_every", s.curriculum.update_every));
    b.push_back(HAP_NUM("teacher.update_every_steps", s.curriculum.update_every_steps));
    b.push_back(HAP_NUM("teacher.task_window", s.curriculum.task_window));
    b.push_back(HAP_BOOL("teacher.mean_baseline", s.curriculum.mean_baseline));
    b.push_back(HAP_BOOL("teacher.feature_success", s.curriculum.feature_success));
    b.push_back(HAP_BOOL("teacher.feature_counts", s.curriculum.feature_counts));
    b.push_back(HAP_BOOL("teacher.feature_returns", s.curriculum.feature_returns));
    b.push_back(HAP_SIZES("teacher.hidden", s.curriculum.teacher_hidden));
    b.push_back(HAP_NUM("teacher.output_scale", s.curriculum.teacher_output_scale));
    b.push_back(HAP_NUM("teacher.replay_capacity", s.curriculum.replay_capacity));
    b.push_back(HAP_NUM("teacher.replay_batch", s.curriculum.replay_batch));
    b.push_back(HAP_NUM("teacher.meta_gamma", s.curriculum.meta_gamma));
    b.push_back(HAP_NUM("teacher.critic_lr", s.curriculum.critic_lr));
    b.push_back(HAP_NUM("baseline.ordered_threshold", s.curriculum.ordered_threshold));
    b.push_back(HAP_NUM("baseline.exp3_gamma", s.curriculum.exp3_gamma));
    b.push_back(HAP_NUM("baseline.tscl_window", s.curriculum.tscl_window));
    b.push_back(HAP_NUM("baseline.tscl_eps", s.curriculum.tscl_eps));
    b.push_back(HAP_NUM("baseline.return_low", s.curriculum.return_low));
    b.push_back(HAP_NUM("baseline.return_high", s.curriculum.return_high));

    b.push_back({"student.algo", [](const ExperimentSpec& s) { return student::algo_name(s.student.algo); },
                 [](ExperimentSpec& s, const std::string& v) { s.student.algo = student::parse_algo(v); }});
    b.push_back(HAP_SIZES("student.hidden", s.student.hidden));
    b.push_back(HAP_NUM("student.policy_lr", s.student.policy_lr));
    b.push_back(HAP_NUM("student.value_lr", s.student.value_lr));
    b.push_back(HAP_NUM("student.gamma", s.student.gamma));
    b.push_back(HAP_NUM("student.gae_lambda", s.student.gae_lambda));
    b.push_back(HAP_NUM("student.clip_eps", s.student.clip_eps));
    b.push_back(HAP_NUM("student.ppo_epochs", s.student.ppo_epochs));
    b.push_back(HAP_NUM("student.minibatches", s.student.minibatches));
    b.push_back(HAP_NUM("student.ent_coef", s.student.ent_coef));
    b.push_back(HAP_NUM("student.vf_coef", s.student.vf_coef));
    b.push_back(HAP_NUM("student.max_grad_norm", s.student.max_grad_norm));
    b.push_back(HAP_BOOL("student.normalize_advantages", s.student.normalize_advantages));
    b.push_back(HAP_NUM("student.embedding_dim", s.student.embedding_dim));
    b.push_back(HAP_NUM("student.actor_output_scale", s.student.actor_output_scale));
    b.push_back(HAP_NUM("student.batch_episodes", s.run.batch_episodes));
    b.push_back(HAP_NUM("student.batch_steps", s.run.batch_steps));
    b.push_back(HAP_NUM("student.segment_steps", s.run.segment_steps));

    b.push_back(HAP_NUM("run.total_steps", s.run.total_steps));
    b.push_back(HAP_NUM("run.eval_every", s.run.eval_every));
    b.push_back(HAP_NUM("run.eval_episodes", s.run.eval_episodes));
    b.push_back({"run.seeds", [](const ExperimentSpec& s) { return join(s.run.seeds); },
                 [](ExperimentSpec& s, const std::string& v) {
                   s.run.seeds.clear();
                   for (const auto& item : split_list(v)) s.run.seeds.push_back(parse_number<std::uint64_t>("run.seeds", item));
                 }});
    b.push_back(HAP_NUM("run.checkpoint_every", s.run.checkpoint_every));
    b.push_back(HAP_NUM("run.threshold", s.run.threshold));
    return b;
  }();
  return table;
}

#undef HAP_NUM
#undef HAP_BOOL
#undef HAP_SIZES

}  // namespace detail

/// All addressable keys in canonical order.
inline std::vector<std::string> spec_keys() {
  std::vector<std::string> out;
  for (const auto& b : detail::bindings()) out.push_back(b.key);
  return out;
}

/// Parses `key = value` lines. Returns the pairs in file order; duplicate keys are errors.
inline std::vector<std::pair<std::string, std::string>> parse_pairs(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> out;
  std::set<std::string> seen;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(number) + ": expected key = value");
    auto key = detail::trim(line.substr(0, eq));
    auto value = detail::trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError("config: duplicate key " + key);
    out.emplace_back(key, value);
  }
  return out;
}

/// Applies `key = value` overrides on top of the defaults of the chosen environment.
inline ExperimentSpec spec_from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::string env_id = "nav";
  for (const auto& [k, v] : pairs)
    if (k == "env.id") env_id = v;
  ExperimentSpec s = defaults_for(env_id);
  const auto& table = detail::bindings();
  bool low_given = false;
  for (const auto& [k, v] : pairs) {
    auto it = std::find_if(table.begin(), table.end(), [&](const detail::Binding& b) { return b.key == k; });
    if (it == table.end()) throw ConfigError("config: unknown key '" + k + "'");
    it->set(s, v);
    low_given = low_given || k == "baseline.return_low";
  }
  if (!low_given) {
    auto env = envs::make_environment(s.env);
    s.curriculum.return_low = -static_cast<double>(env->step_cap()) * s.env.step_penalty;
  }
  s.validate();
  return s;
}

inline ExperimentSpec parse_spec(std::istream& in) { return spec_from_pairs(parse_pairs(in)); }

inline ExperimentSpec parse_spec_text(const std::string& text) {
  std::istringstream in(text);
  return parse_spec(in);
}

inline ExperimentSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open spec file " + path);
  return parse_spec(in);
}

/// Every key with its value; parsing the result reproduces the experiment spec.
inline std::string resolved_text(const ExperimentSpec& s) {
  std::ostringstream out;
  for (const auto& b : detail::bindings()) out << b.key << " = " << b.get(s) << '\n';
  return out.str();
}

}  // namespace hap::harness

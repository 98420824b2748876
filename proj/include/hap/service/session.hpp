#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hap/core/error.hpp"
#include "hap/core/rng.hpp"
#include "hap/envs/minigrid.hpp"
#include "hap/teacher/history.hpp"
#include "hap/teacher/teachers.hpp"

namespace hap::service {

using Json = nlohmann::json;

inline constexpr int kWireVersion = 1;

enum class Condition { kNoTutorial, kExpertOrdered, kHapAdaptive };

inline std::string condition_name(Condition c) {
  switch (c) {
    case Condition::kNoTutorial: return "NoTutorial";
    case Condition::kExpertOrdered: return "ExpertOrdered";
    case Condition::kHapAdaptive: return "HapAdaptive";
  }
  return "?";
}

inline Condition parse_condition(const std::string& s) {
  for (auto c : {Condition::kNoTutorial, Condition::kExpertOrdered, Condition::kHapAdaptive})
    if (condition_name(c) == s) return c;
  throw ConfigError("unknown condition '" + s + "'");
}

inline const std::vector<std::string>& event_types() {
  static const std::vector<std::string> kTypes{"session_created", "task_assigned",       "observation",
                                               "action_result",   "episode_end",         "curriculum_advanced",
                                               "score_update",    "session_summary"};
  return kTypes;
}

/// One line of the wire protocol: {"payload":{...},"seq":N,"type":"...","v":1}.
struct WireEvent {
  std::int64_t seq = 0;
  std::string type;
  Json payload = Json::object();

  [[nodiscard]] std::string to_line() const {
    return Json{{"v", kWireVersion}, {"seq", seq}, {"type", type}, {"payload", payload}}.dump();
  }

  static WireEvent parse(const std::string& line) {
    auto j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw FormatError("wire: not a JSON object");
    if (!j.contains("v") || j["v"] != kWireVersion) throw FormatError("wire: unsupported version");
    if (!j.contains("seq") || !j["seq"].is_number_integer()) throw FormatError("wire: missing seq");
    if (!j.contains("type") || !j["type"].is_string()) throw FormatError("wire: missing type");
    WireEvent e;
    e.seq = j["seq"].get<std::int64_t>();
    e.type = j["type"].get<std::string>();
    const auto& types = event_types();
    if (std::find(types.begin(), types.end(), e.type) == types.end())
      throw FormatError("wire: unknown event type '" + e.type + "'");
    if (j.contains("payload")) e.payload = j["payload"];
    return e;
  }

  friend bool operator==(const WireEvent&, const WireEvent&) = default;
};

inline std::string to_lines(const std::vector<WireEvent>& events) {
  std::string out;
  for (const auto& e : events) out += e.to_line() + '\n';
  return out;
}

/// Expert mini-tutorial sequence: one captioned skill per step, ending in the test task.
struct ExpertStep {
  std::string task;
  std::string caption;
};

inline const std::vector<ExpertStep>& expert_sequence() {
  static const std::vector<ExpertStep> kSteps{
      {"Empty", "Walk to the goal square."},
      {"Crossing", "Find the gap and avoid the hazard line."},
      {"DoorKey", "Pick up the key, then unlock the door."},
      {"FourRooms", "Find the goal across several rooms."},
      {"MultiRoom", "Open each door on the way to the goal."},
      {"Playground", "Collect every object."},
  };
  return kSteps;
}

inline constexpr const char* kTestTask = "Playground";

/// Score bonuses on top of the environment reward; humans only see the total.
struct ScoreShaping {
  double pickup = 0.05;
  double open = 0.05;
  double hazard = -0.1;
};

struct ServiceConfig {
  envs::MinigridConfig env;
  teacher::CurriculumConfig teacher = human_teacher();
  ScoreShaping shaping;

  /// W = 10, update after every episode, p_min = 0.05, no warm-up.
  static teacher::CurriculumConfig human_teacher() {
    teacher::CurriculumConfig c;
    c.window = 10;
    c.update_every = 1;
    c.p_min = 0.05;
    c.warmup_episodes_per_task = 0;
    c.teacher_lr = 0.5;
    c.mean_baseline = false;
    return c;
  }

  [[nodiscard]] Json to_json() const {
    return Json{{"env",
                 {{"size", env.size},
                  {"multiroom_rooms", env.multiroom_rooms},
                  {"step_cap", env.step_cap},
                  {"success_reward", env.reward.success_reward},
                  {"step_penalty", env.reward.step_penalty}}},
                {"teacher",
                 {{"kind", "logit"},
                  {"window", teacher.window},
                  {"update_every", teacher.update_every},
                  {"p_min", teacher.p_min},
                  {"lr", teacher.teacher_lr},
                  {"entropy_weight", teacher.entropy_weight},
                  {"mean_baseline", teacher.mean_baseline}}},
                {"shaping", {{"pickup", shaping.pickup}, {"open", shaping.open}, {"hazard", shaping.hazard}}}};
  }
};

struct EpisodeRecord {
  std::int64_t episode = 0;
  std::string task;
  double ret = 0.0;
  double score = 0.0;
  bool success = false;
  int steps = 0;
};

/// A single human's curriculum session. Not thread-safe; the store serialises access.
///
/// Every state change is driven by one of three requests (action, advance,
/// summary) and produces a batch of events; the event log alone is enough to
/// replay the session.
class Session {
 public:
  Session(std::string id, Condition condition, std::uint64_t seed, ServiceConfig config = {})
      : id_(std::move(id)),
        condition_(condition),
        seed_(seed),
        config_(std::move(config)),
        env_(config_.env),
        history_(env_.tasks().size(), config_.teacher.window),
        task_rng_(RngStream(seed).split("tasks")),
        stats_(env_.tasks().size()) {
    if (condition_ == Condition::kHapAdaptive)
      teacher_ = std::make_unique<teacher::LogitTeacher>(env_.tasks().size(), config_.teacher, false);
    buttons_ = {envs::kPickup, envs::kToggle};
    auto rng = RngStream(seed).split("buttons");
    rng.shuffle(buttons_);
    Json tasks = Json::array();
    for (std::size_t t = 0; t < env_.tasks().size(); ++t) tasks.push_back(env_.tasks().name(t));
    Json buttons = Json::array();
    for (int a = 0; a < action_count(); ++a) buttons.push_back({{"id", a}, {"label", action_label(a)}});
    Json created{{"session", id_},   {"condition", condition_name(condition_)}, {"seed", seed_},
                 {"tasks", tasks},   {"buttons", buttons},                      {"config", config_.to_json()}};
    if (condition_ == Condition::kExpertOrdered) {
      Json steps = Json::array();
      for (const auto& s : expert_sequence()) steps.push_back({{"task", s.task}, {"caption", s.caption}});
      created["expert_sequence"] = steps;
    }
    std::vector<WireEvent> batch;
    emit(batch, "session_created", std::move(created));
    assign(batch, "start");
  }

  [[nodiscard]] const std::string& id() const { return id_; }
  [[nodiscard]] Condition condition() const { return condition_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] const ServiceConfig& config() const { return config_; }
  [[nodiscard]] const std::vector<WireEvent>& events() const { return log_; }
  [[nodiscard]] bool episode_active() const { return active_; }
  [[nodiscard]] std::int64_t observation_seq() const { return obs_seq_; }
  [[nodiscard]] double score() const { return score_; }
  [[nodiscard]] const std::string& current_task() const { return env_.tasks().name(task_); }
  [[nodiscard]] const teacher::HistoryWindow& history() const { return history_; }
  [[nodiscard]] const teacher::LogitTeacher* teacher() const { return teacher_.get(); }

  /// Movement actions 0..3 (up, right, down, left), then the generic buttons.
  [[nodiscard]] int action_count() const { return 4 + static_cast<int>(buttons_.size()); }

  [[nodiscard]] std::string action_label(int action) const {
    static constexpr const char* kMoves[4] = {"Up", "Right", "Down", "Left"};
    require(action >= 0 && action < action_count(), "session: action id out of range");
    return action < 4 ? kMoves[action] : "Button " + std::to_string(action - 3);
  }

  /// Environment action behind a wire action id (the button mapping is fixed per session).
  [[nodiscard]] int env_action(int action) const {
    require(action >= 0 && action < action_count(), "session: action id out of range");
    return action < 4 ? action : buttons_[static_cast<std::size_t>(action - 4)];
  }

  /// Wire action ids of the scripted oracle's plan from the current state (tests, scripted sessions).
  [[nodiscard]] std::optional<std::vector<int>> oracle_actions() const {
    if (!active_) return std::nullopt;
    auto plan = env_.oracle_from_state();
    if (!plan) return std::nullopt;
    for (int& a : *plan)
      if (a >= 4) a = 4 + static_cast<int>(std::find(buttons_.begin(), buttons_.end(), a) - buttons_.begin());
    return plan;
  }

  /// `seq` is the observation the client acted on; anything but the latest is stale.
  std::vector<WireEvent> submit_action(std::int64_t seq, int action) {
    if (!active_) throw Conflict("session " + id_ + ": episode has ended; advance the curriculum");
    if (seq != obs_seq_)
      throw Conflict("session " + id_ + ": stale seq " + std::to_string(seq) + ", latest observation is " +
                     std::to_string(obs_seq_));
    if (action < 0 || action >= action_count()) throw ContractViolation("session: unknown action id");
    auto r = env_.step(env_action(action));
    double delta = r.reward;
    if (r.events.picked_up) delta += config_.shaping.pickup;
    if (r.events.opened) delta += config_.shaping.open;
    if (r.events.hazard) delta += config_.shaping.hazard;
    ret_ += r.reward;
    episode_score_ += delta;
    score_ += delta;
    ++actions_;
    std::vector<WireEvent> batch;
    emit(batch, "action_result",
         {{"observation_seq", seq},
          {"action", action},
          {"reward", r.reward},
          {"done", r.done},
          {"blocked", r.events.blocked}});
    emit(batch, "score_update", {{"delta", delta}, {"score", score_}});
    obs_seq_ = emit(batch, "observation", observation_payload());
    if (r.done) end_episode(batch, r.success);
    return batch;
  }

  std::vector<WireEvent> advance_curriculum() {
    if (active_) throw Conflict("session " + id_ + ": episode still active");
    std::vector<WireEvent> batch;
    assign(batch, "advance");
    return batch;
  }

  [[nodiscard]] Json summary_record() const {
    Json tasks = Json::array();
    for (std::size_t t = 0; t < stats_.size(); ++t)
      tasks.push_back({{"task", env_.tasks().name(t)},
                       {"attempts", stats_[t].attempts},
                       {"successes", stats_[t].successes},
                       {"score", stats_[t].score}});
    Json episodes = Json::array();
    for (const auto& e : episodes_)
      episodes.push_back({{"episode", e.episode},
                          {"task", e.task},
                          {"return", e.ret},
                          {"score", e.score},
                          {"success", e.success},
                          {"steps", e.steps}});
    return Json{{"session", id_},
                {"condition", condition_name(condition_)},
                {"seed", seed_},
                {"episodes", static_cast<std::int64_t>(episodes_.size())},
                {"actions", actions_},
                {"score", score_},
                {"tasks", tasks},
                {"trajectory", episodes}};
  }

  /// Appends a session_summary event carrying the current summary record.
  std::vector<WireEvent> summary() {
    std::vector<WireEvent> batch;
    emit(batch, "session_summary", summary_record());
    return batch;
  }

  /// Events with seq > `after`.
  [[nodiscard]] std::vector<WireEvent> events_after(std::int64_t after) const {
    std::vector<WireEvent> out;
    for (const auto& e : log_)
      if (e.seq > after) out.push_back(e);
    return out;
  }

  [[nodiscard]] Json export_json() const {
    Json events = Json::array();
    for (const auto& e : log_) events.push_back(Json::parse(e.to_line()));
    return Json{{"v", kWireVersion}, {"config", config_.to_json()}, {"events", events}};
  }

 private:
  struct TaskStats {
    std::int64_t attempts = 0;
    std::int64_t successes = 0;
    double score = 0.0;
  };

  std::int64_t emit(std::vector<WireEvent>& batch, std::string type, Json payload) {
    WireEvent e{++seq_, std::move(type), std::move(payload)};
    log_.push_back(e);
    batch.push_back(std::move(e));
    return seq_;
  }

  [[nodiscard]] Json observation_payload() const {
    const auto obs = env_.observation();
    Json inventory = Json::array();
    for (int n : obs.inventory) inventory.push_back(n);
    return Json{{"episode", episode_},
                {"task", env_.tasks().name(obs.task)},
                {"rows", obs.rows},
                {"cols", obs.cols},
                {"grid", obs.grid},
                {"agent", {{"row", obs.agent.row}, {"col", obs.agent.col}}},
                {"facing", obs.facing},
                {"inventory", inventory},
                {"step", env_.steps_taken()},
                {"cap", env_.step_cap()}};
  }

  std::size_t next_task(Json& payload) {
    const auto& names = env_.tasks();
    switch (condition_) {
      case Condition::kNoTutorial:
        payload["caption"] = "";
        return names.index_of(kTestTask);
      case Condition::kExpertOrdered: {
        const auto& seq = expert_sequence();
        const auto& step = seq[std::min(expert_pos_, seq.size() - 1)];
        payload["caption"] = step.caption;
        payload["expert_step"] = std::min(expert_pos_, seq.size() - 1);
        return names.index_of(step.task);
      }
      case Condition::kHapAdaptive: {
        const auto dist = teacher_->distribution();
        payload["caption"] = "";
        payload["probs"] = dist.probs();
        return teacher_->sample_task(task_rng_);
      }
    }
    return 0;
  }

  void assign(std::vector<WireEvent>& batch, const char* reason) {
    Json payload{{"episode", episode_ + 1}, {"reason", reason}};
    task_ = next_task(payload);
    ++episode_;
    payload["task"] = env_.tasks().name(task_);
    payload["task_index"] = task_;
    const std::uint64_t episode_seed = RngStream(seed_).split("episodes").split(static_cast<std::uint64_t>(episode_)).seed();
    env_.reset(task_, episode_seed);
    active_ = true;
    ret_ = 0.0;
    episode_score_ = 0.0;
    emit(batch, "task_assigned", std::move(payload));
    obs_seq_ = emit(batch, "observation", observation_payload());
  }

  void end_episode(std::vector<WireEvent>& batch, bool success) {
    active_ = false;
    const int steps = env_.steps_taken();
    auto& st = stats_[task_];
    ++st.attempts;
    st.successes += success ? 1 : 0;
    st.score += episode_score_;
    episodes_.push_back({episode_, env_.tasks().name(task_), ret_, episode_score_, success, steps});
    history_.push(task_, ret_, success);
    emit(batch, "episode_end",
         {{"episode", episode_},
          {"task", env_.tasks().name(task_)},
          {"return", ret_},
          {"score", episode_score_},
          {"success", success},
          {"steps", steps}});
    Json adv{{"episode", episode_}, {"condition", condition_name(condition_)}};
    if (teacher_) {
      teacher_->observe(task_, ret_, success);
      const auto s = teacher_->update();
      adv["applied"] = s.applied;
      adv["teacher_reward"] = s.teacher_reward;
      adv["grad_norm"] = s.grad_norm;
      adv["probs"] = teacher_->distribution().probs();
    } else if (condition_ == Condition::kExpertOrdered) {
      ++expert_pos_;
      adv["expert_step"] = std::min(expert_pos_, expert_sequence().size() - 1);
    }
    emit(batch, "curriculum_advanced", std::move(adv));
  }

  std::string id_;
  Condition condition_;
  std::uint64_t seed_;
  ServiceConfig config_;
  envs::MinigridEnv env_;
  teacher::HistoryWindow history_;
  RngStream task_rng_;
  std::unique_ptr<teacher::LogitTeacher> teacher_;
  std::vector<int> buttons_;
  std::vector<WireEvent> log_;
  std::vector<TaskStats> stats_;
  std::vector<EpisodeRecord> episodes_;
  std::int64_t seq_ = 0;
  std::int64_t obs_seq_ = 0;
  std::int64_t episode_ = 0;
  std::int64_t actions_ = 0;
  std::size_t task_ = 0;
  std::size_t expert_pos_ = 0;
  bool active_ = false;
  double ret_ = 0.0;
  double episode_score_ = 0.0;
  double score_ = 0.0;
};

/// Re-issues the requests recorded in `events` against a fresh session and
/// returns it. Throws FormatError when the log does not start with
/// session_created or when the replayed events differ from the recording.
inline std::unique_ptr<Session> replay(const std::vector<WireEvent>& events, ServiceConfig config = {}) {
  if (events.empty() || events[0].type != "session_created") throw FormatError("replay: log must start with session_created");
  const auto& c = events[0].payload;
  auto s = std::make_unique<Session>(c.at("session").get<std::string>(),
                                     parse_condition(c.at("condition").get<std::string>()),
                                     c.at("seed").get<std::uint64_t>(), std::move(config));
  for (const auto& e : events) {
    if (e.seq <= static_cast<std::int64_t>(s->events().size())) continue;
    if (e.type == "action_result") {
      (void)s->submit_action(e.payload.at("observation_seq").get<std::int64_t>(), e.payload.at("action").get<int>());
    } else if (e.type == "task_assigned") {
      (void)s->advance_curriculum();
    } else if (e.type == "session_summary") {
      (void)s->summary();
    } else {
      throw FormatError("replay: event " + std::to_string(e.seq) + " (" + e.type + ") does not start a request");
    }
  }
  if (s->events() != events) throw FormatError("replay: replayed events differ from the recording");
  return s;
}

/// Inverse of Session::export_json.
inline std::unique_ptr<Session> import_session(const Json& j) {
  if (!j.is_object() || !j.contains("v") || j["v"] != kWireVersion || !j.contains("events"))
    throw FormatError("import: not a session export");
  ServiceConfig config;
  if (j.contains("config")) {
    const auto& c = j["config"];
    const auto& e = c.at("env");
    config.env.size = e.at("size").get<int>();
    config.env.multiroom_rooms = e.at("multiroom_rooms").get<int>();
    config.env.step_cap = e.at("step_cap").get<int>();
    config.env.reward.success_reward = e.at("success_reward").get<double>();
    config.env.reward.step_penalty = e.at("step_penalty").get<double>();
    const auto& t = c.at("teacher");
    config.teacher.window = t.at("window").get<std::size_t>();
    config.teacher.update_every = t.at("update_every").get<int>();
    config.teacher.p_min = t.at("p_min").get<double>();
    config.teacher.teacher_lr = t.at("lr").get<double>();
    config.teacher.entropy_weight = t.at("entropy_weight").get<double>();
    config.teacher.mean_baseline = t.at("mean_baseline").get<bool>();
    const auto& s = c.at("shaping");
    config.shaping.pickup = s.at("pickup").get<double>();
    config.shaping.open = s.at("open").get<double>();
    config.shaping.hazard = s.at("hazard").get<double>();
  }
  std::vector<WireEvent> events;
  for (const auto& e : j["events"]) events.push_back(WireEvent::parse(e.dump()));
  return replay(events, config);
}

}  // namespace hap::service

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hap/envs/observation.hpp"
#include "hap/envs/task_space.hpp"

namespace hap::envs {

/// Side effects of a step that a human-facing score can reward.
struct StepEvents {
  bool blocked = false;
  bool picked_up = false;
  bool opened = false;
  bool crafted = false;
  bool hazard = false;
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  bool done = false;
  bool success = false;
  bool terminated = false;
  StepEvents events;
};

struct RewardConfig {
  double success_reward = 1.0;
  double step_penalty = 0.001;
};

/// Deterministic, seed-reproducible grid environment over a TaskSpace.
///
/// The (reset, step*) transcript is a pure function of (task, seed, actions).
class Environment {
 public:
  virtual ~Environment() = default;

  [[nodiscard]] virtual std::string id() const = 0;
  [[nodiscard]] virtual const TaskSpace& tasks() const = 0;
  [[nodiscard]] virtual int action_count() const = 0;
  [[nodiscard]] virtual std::vector<std::string> action_names() const = 0;
  [[nodiscard]] virtual int step_cap() const = 0;
  [[nodiscard]] virtual ObservationEncoder encoder() const = 0;
  [[nodiscard]] virtual std::unique_ptr<Environment> clone() const = 0;

  virtual Observation reset(std::size_t task, std::uint64_t seed) = 0;
  virtual StepResult step(int action) = 0;

  /// Action sequence produced by the scripted oracle (BFS routes, topological
  /// craft plans), or nullopt when the oracle finds no plan.
  [[nodiscard]] virtual std::optional<std::vector<int>> oracle_plan(std::size_t task, std::uint64_t seed) const = 0;

  [[nodiscard]] virtual Observation observation() const = 0;
  [[nodiscard]] virtual bool done() const = 0;
  [[nodiscard]] virtual int steps_taken() const = 0;
  [[nodiscard]] virtual std::string render_rows() const = 0;

  /// True iff the oracle's plan completes the task within the step cap.
  [[nodiscard]] bool solvable(std::size_t task, std::uint64_t seed) const {
    if (task >= tasks().size()) throw DomainError("solvable: unknown task index");
    auto plan = oracle_plan(task, seed);
    if (!plan || static_cast<int>(plan->size()) > step_cap()) return false;
    auto sim = clone();
    sim->reset(task, seed);
    for (int a : *plan) {
      auto r = sim->step(a);
      if (r.done) return r.success;
    }
    return false;
  }

  /// Layout dump: header lines then the text grid.
  [[nodiscard]] std::string layout_dump() const {
    std::ostringstream out;
    auto obs = observation();
    out << "env " << id() << '\n';
    out << "task " << tasks().name(obs.task) << '\n';
    out << "seed " << seed_ << '\n';
    out << "cap " << step_cap() << '\n';
    out << "step " << steps_taken() << '\n';
    out << render_rows();
    return out.str();
  }

  [[nodiscard]] std::uint64_t seed() const { return seed_; }

 protected:
  std::uint64_t seed_ = 0;
};

}  // namespace hap::envs

#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hap/core/error.hpp"
#include "hap/core/rng.hpp"
#include "hap/envs/environment.hpp"
#include "hap/envs/grid.hpp"

namespace hap::envs {

/// Cell codes shared by the navigation and Minigrid-style worlds.
namespace cell {
enum : std::uint8_t {
  kEmpty = 0,
  kWall,
  kGoal,
  kLava,
  kKey,
  kDoorLocked,
  kDoorClosed,
  kDoorOpen,
  kBall,
  kBox,
  kCount
};
}  // namespace cell

/// Action ids: the four moves share ids with Direction.
enum GridAction : int { kMoveUp = 0, kMoveRight = 1, kMoveDown = 2, kMoveLeft = 3, kPickup = 4, kToggle = 5 };

/// Inventory slots for carried objects.
enum Carry : std::size_t { kCarryKey = 0, kCarryBall = 1, kCarryBox = 2, kCarryCount = 3 };

struct GridLayout {
  Grid grid;
  GridPos agent;
  int facing = kUp;
};

/// Common mechanics for goal-reaching grid worlds.
///
/// Moving sets the facing direction even when the move is blocked. Pickup and
/// toggle act on the faced cell. Entering lava ends the episode without
/// success. Every step costs the step penalty; completing the task adds the
/// success reward on that step.
class GridWorldEnv : public Environment {
 public:
  [[nodiscard]] const TaskSpace& tasks() const override { return tasks_; }
  [[nodiscard]] int action_count() const override { return action_count_; }
  [[nodiscard]] int step_cap() const override { return cap_; }

  [[nodiscard]] std::vector<std::string> action_names() const override {
    std::vector<std::string> names{"up", "right", "down", "left", "pickup", "toggle"};
    names.resize(static_cast<std::size_t>(action_count_));
    return names;
  }

  [[nodiscard]] ObservationEncoder encoder() const override {
    ObservationEncoder enc;
    enc.rows = rows_;
    enc.cols = cols_;
    enc.code_count = code_count_;
    enc.wall_code = cell::kWall;
    enc.inventory_size = inventory_size_;
    enc.task_count = tasks_.size();
    return enc;
  }

  Observation reset(std::size_t task, std::uint64_t seed) override {
    if (task >= tasks_.size()) throw DomainError("reset: unknown task index " + std::to_string(task));
    seed_ = seed;
    load_layout(task, generate(task, seed));
    return observation();
  }

  /// Starts an episode from an explicit layout (tests, corrupted layouts).
  void load_layout(std::size_t task, GridLayout layout) {
    if (task >= tasks_.size()) throw DomainError("load_layout: unknown task index");
    require(layout.grid.rows() == rows_ && layout.grid.cols() == cols_, "load_layout: grid shape mismatch");
    require(layout.grid.inside(layout.agent), "load_layout: agent outside grid");
    task_ = task;
    grid_ = std::move(layout.grid);
    agent_ = layout.agent;
    facing_ = layout.facing;
    inventory_.assign(inventory_size_, 0);
    spawned_objects_ = 0;
    for (auto code : grid_.cells())
      if (code == cell::kBall || code == cell::kBox || code == cell::kKey) ++spawned_objects_;
    steps_ = 0;
    done_ = false;
  }

  StepResult step(int action) override {
    require(!done_, "step: episode already finished");
    require(action >= 0 && action < action_count_, "step: action id out of range");
    ++steps_;
    StepResult result;
    result.reward = -reward_.step_penalty;
    if (action < 4) {
      if (turn_on_move_) facing_ = action;
      const GridPos target = moved(agent_, action);
      const std::uint8_t code = grid_.inside(target) ? grid_.at(target) : std::uint8_t{cell::kWall};
      if (walkable(code)) {
        agent_ = target;
        if (code == cell::kLava) {
          result.events.hazard = true;
          done_ = true;
          result.terminated = true;
        }
      } else {
        result.events.blocked = true;
      }
    } else if (action == kPickup) {
      const GridPos target = moved(agent_, facing_);
      if (grid_.inside(target)) {
        const auto code = grid_.at(target);
        std::optional<std::size_t> slot;
        if (code == cell::kKey) slot = kCarryKey;
        if (code == cell::kBall) slot = kCarryBall;
        if (code == cell::kBox) slot = kCarryBox;
        if (slot && *slot < inventory_size_) {
          grid_.set(target, cell::kEmpty);
          ++inventory_[*slot];
          result.events.picked_up = true;
        }
      }
    } else if (action == kToggle) {
      const GridPos target = moved(agent_, facing_);
      if (grid_.inside(target)) {
        const auto code = grid_.at(target);
        if (code == cell::kDoorClosed ||
            (code == cell::kDoorLocked && inventory_size_ > kCarryKey && inventory_[kCarryKey] > 0)) {
          grid_.set(target, cell::kDoorOpen);
          result.events.opened = true;
        } else if (code == cell::kDoorOpen) {
          grid_.set(target, cell::kDoorClosed);
        }
      }
    }
    if (!done_ && task_complete()) {
      result.reward += reward_.success_reward;
      result.success = true;
      result.terminated = true;
      done_ = true;
    }
    if (!done_ && steps_ >= cap_) done_ = true;
    result.done = done_;
    result.obs = observation();
    return result;
  }

  [[nodiscard]] Observation observation() const override {
    Observation obs;
    obs.rows = rows_;
    obs.cols = cols_;
    obs.grid = grid_.cells();
    obs.agent = agent_;
    obs.facing = facing_;
    obs.inventory = inventory_;
    obs.task = task_;
    obs.task_count = tasks_.size();
    return obs;
  }

  [[nodiscard]] bool done() const override { return done_; }
  [[nodiscard]] int steps_taken() const override { return steps_; }
  [[nodiscard]] const Grid& grid() const { return grid_; }
  [[nodiscard]] GridPos agent() const { return agent_; }
  [[nodiscard]] std::size_t task() const { return task_; }

  [[nodiscard]] std::string render_rows() const override {
    static constexpr char kGlyph[cell::kCount] = {'.', '#', 'G', '~', 'k', 'L', 'D', '_', 'b', 'x'};
    static constexpr char kAgent[4] = {'^', '>', 'v', '<'};
    std::string out;
    for (int r = 0; r < rows_; ++r) {
      for (int c = 0; c < cols_; ++c)
        out += (GridPos{r, c} == agent_) ? kAgent[facing_] : kGlyph[grid_.at({r, c})];
      out += '\n';
    }
    if (inventory_size_ > 0) {
      out += "inventory key=" + std::to_string(inventory_[kCarryKey]);
      if (inventory_size_ > kCarryBall) out += " ball=" + std::to_string(inventory_[kCarryBall]);
      if (inventory_size_ > kCarryBox) out += " box=" + std::to_string(inventory_[kCarryBox]);
      out += '\n';
    }
    return out;
  }

  [[nodiscard]] std::optional<std::vector<int>> oracle_plan(std::size_t task, std::uint64_t seed) const override {
    auto sim = clone_grid();
    sim->reset(task, seed);
    return sim->plan_from_current();
  }

  /// Scripted oracle from the current state (uses a private copy).
  [[nodiscard]] std::optional<std::vector<int>> oracle_from_state() const {
    auto sim = clone_grid();
    return sim->plan_from_current();
  }

  [[nodiscard]] static bool walkable(std::uint8_t code) {
    return code == cell::kEmpty || code == cell::kGoal || code == cell::kDoorOpen || code == cell::kLava;
  }

 protected:
  GridWorldEnv(TaskSpace tasks, int rows, int cols, int code_count, int action_count, int cap, RewardConfig reward,
               std::size_t inventory_size)
      : tasks_(std::move(tasks)),
        rows_(rows),
        cols_(cols),
        code_count_(code_count),
        action_count_(action_count),
        cap_(cap),
        reward_(reward),
        inventory_size_(inventory_size),
        grid_(rows, cols) {
    require(rows >= 3 && cols >= 3, "grid world: grid too small");
    require(cap > 0, "grid world: step cap must be positive");
    inventory_.assign(inventory_size_, 0);
  }

  [[nodiscard]] virtual GridLayout generate(std::size_t task, std::uint64_t seed) const = 0;
  [[nodiscard]] virtual std::unique_ptr<GridWorldEnv> clone_grid() const = 0;

  /// Default completion: standing on the goal.
  [[nodiscard]] virtual bool task_complete() const { return grid_.at(agent_) == cell::kGoal; }

  /// Task-specific scripted oracle executed on this (scratch) instance.
  virtual std::optional<std::vector<int>> plan_from_current() { return plan_reach_goal(); }

  /// Moves along `route`, recording actions. Returns false if the episode ended early.
  bool follow(const std::vector<int>& route, std::vector<int>& plan) {
    for (int d : route) {
      if (done_) return false;
      plan.push_back(d);
      step(d);
    }
    return true;
  }

  /// Walk next to a cell satisfying `target` (through safe cells), face it and apply `action`.
  bool interact(const std::function<bool(GridPos)>& target, int action, std::vector<int>& plan) {
    auto safe = [&](GridPos p) { return safe_cell(grid_.at(p)); };
    auto adjacent = [&](GridPos p) {
      for (int d = 0; d < 4; ++d) {
        GridPos q = moved(p, d);
        if (grid_.inside(q) && target(q)) return true;
      }
      return false;
    };
    auto route = bfs_route(grid_, agent_, safe, adjacent);
    if (!route || !follow(*route, plan) || done_) return false;
    for (int d = 0; d < 4; ++d) {
      GridPos q = moved(agent_, d);
      if (grid_.inside(q) && target(q)) {
        if (facing_ != d) {
          plan.push_back(d);
          step(d);  // blocked move only turns the agent
          if (done_) return false;
        }
        plan.push_back(action);
        step(action);
        return true;
      }
    }
    return false;
  }

  /// Reach the goal, opening closed doors, fetching a key for locked doors and
  /// picking up objects that block the way.
  std::optional<std::vector<int>> plan_reach_goal() {
    std::vector<int> plan;
    auto safe = [&](GridPos p) { return safe_cell(grid_.at(p)); };
    auto is_goal = [&](GridPos p) { return grid_.at(p) == cell::kGoal; };
    auto is_object = [](std::uint8_t c) { return c == cell::kKey || c == cell::kBall || c == cell::kBox; };
    for (int guard = 0; guard < 64 && !done_; ++guard) {
      if (auto direct = bfs_route(grid_, agent_, safe, is_goal)) {
        follow(*direct, plan);
        break;
      }
      auto through = [&](GridPos p) {
        auto c = grid_.at(p);
        return safe_cell(c) || c == cell::kDoorClosed || c == cell::kDoorLocked || is_object(c);
      };
      auto route = bfs_route(grid_, agent_, through, is_goal);
      if (!route) return std::nullopt;
      GridPos p = agent_, blocker{-1, -1};
      for (int d : *route) {
        p = moved(p, d);
        if (!safe_cell(grid_.at(p))) {
          blocker = p;
          break;
        }
      }
      const auto code = grid_.at(blocker);
      if (is_object(code)) {
        if (!interact([&](GridPos q) { return q == blocker; }, kPickup, plan)) return std::nullopt;
        if (grid_.at(blocker) != cell::kEmpty) return std::nullopt;
        continue;
      }
      if (code == cell::kDoorLocked && (inventory_size_ == 0 || inventory_[kCarryKey] == 0)) {
        if (!interact([&](GridPos q) { return grid_.at(q) == cell::kKey; }, kPickup, plan)) return std::nullopt;
        continue;
      }
      if (!interact([&](GridPos q) { return q == blocker; }, kToggle, plan)) return std::nullopt;
      if (grid_.at(blocker) != cell::kDoorOpen) return std::nullopt;
    }
    if (!done_ || !task_complete()) return std::nullopt;
    return plan;
  }

  [[nodiscard]] static bool safe_cell(std::uint8_t code) {
    return code == cell::kEmpty || code == cell::kGoal || code == cell::kDoorOpen;
  }

  TaskSpace tasks_;
  int rows_;
  int cols_;
  int code_count_;
  int action_count_;
  int cap_;
  RewardConfig reward_;
  std::size_t inventory_size_;

  Grid grid_;
  GridPos agent_;
  int facing_ = kUp;
  bool turn_on_move_ = true;  ///< false: movement never changes the facing (nav has no facing-dependent actions)
  std::vector<int> inventory_;
  int spawned_objects_ = 0;
  std::size_t task_ = 0;
  int steps_ = 0;
  bool done_ = false;
};

}  // namespace hap::envs

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hap/envs/gridworld.hpp"

namespace hap::envs {

/// Minigrid-style suite: six goal-directed tasks on one square canvas.
struct MinigridConfig {
  int size = 9;  ///< canvas side including the outer wall
  int multiroom_rooms = 3;
  int step_cap = 200;
  RewardConfig reward;
};

enum class MinigridTask { kEmpty, kCrossing, kDoorKey, kFourRooms, kMultiRoom, kPlayground };

inline TaskSpace minigrid_space() {
  return TaskSpace({{"Empty", Tier::kEasy},
                    {"Crossing", Tier::kEasy},
                    {"DoorKey", Tier::kMiddle},
                    {"FourRooms", Tier::kMiddle},
                    {"MultiRoom", Tier::kHard},
                    {"Playground", Tier::kHard}});
}

class MinigridEnv final : public GridWorldEnv {
 public:
  /// `task_names` selects and orders a subset of the suite (empty = all six).
  explicit MinigridEnv(MinigridConfig config = {}, const std::vector<std::string>& task_names = {})
      : GridWorldEnv(task_names.empty() ? minigrid_space() : minigrid_space().subset(task_names), config.size,
                     config.size, cell::kCount, /*actions=*/6, config.step_cap, config.reward, kCarryCount),
        config_(config) {
    require(config_.size >= 7, "minigrid: canvas must be at least 7x7");
    require(config_.multiroom_rooms >= 2 && config_.multiroom_rooms <= (config_.size - 1) / 2,
            "minigrid: unsupported room count");
    const auto full = minigrid_space();
    for (std::size_t i = 0; i < tasks_.size(); ++i)
      kinds_.push_back(static_cast<MinigridTask>(full.index_of(tasks_.name(i))));
  }

  [[nodiscard]] std::string id() const override { return "minigrid"; }
  [[nodiscard]] std::unique_ptr<Environment> clone() const override { return std::make_unique<MinigridEnv>(*this); }
  [[nodiscard]] MinigridTask kind(std::size_t task) const { return kinds_.at(task); }
  [[nodiscard]] const MinigridConfig& config() const { return config_; }

 protected:
  [[nodiscard]] GridLayout generate(std::size_t task, std::uint64_t seed) const override {
    RngStream rng(seed);
    const int s = config_.size;
    GridLayout layout{Grid(s, s), {1, 1}, static_cast<int>(rng.below(4))};
    Grid& g = layout.grid;
    g.frame(cell::kWall);
    auto random_cell = [&](int r0, int r1, int c0, int c1) {
      for (;;) {
        GridPos p{r0 + static_cast<int>(rng.below(static_cast<std::uint64_t>(r1 - r0 + 1))),
                  c0 + static_cast<int>(rng.below(static_cast<std::uint64_t>(c1 - c0 + 1)))};
        if (g.at(p) == cell::kEmpty && !(p == layout.agent)) return p;
      }
    };
    switch (kinds_.at(task)) {
      case MinigridTask::kEmpty: {
        g.set({s - 2, s - 2}, cell::kGoal);
        layout.agent = random_cell(1, s - 2, 1, s - 2);
        break;
      }
      case MinigridTask::kCrossing: {
        const bool vertical = rng.below(2) == 0;
        const int line = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(s - 4)));
        const int gap = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(s - 2)));
        for (int i = 1; i <= s - 2; ++i)
          if (i != gap) g.set(vertical ? GridPos{i, line} : GridPos{line, i}, cell::kLava);
        layout.agent = {1, 1};
        g.set({s - 2, s - 2}, cell::kGoal);
        break;
      }
      case MinigridTask::kDoorKey: {
        const int wall = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(s - 4)));
        for (int r = 1; r <= s - 2; ++r) g.set({r, wall}, cell::kWall);
        g.set({1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(s - 2))), wall}, cell::kDoorLocked);
        g.set({s - 2, s - 2}, cell::kGoal);
        layout.agent = random_cell(1, s - 2, 1, wall - 1);
        g.set(random_cell(1, s - 2, 1, wall - 1), cell::kKey);
        break;
      }
      case MinigridTask::kFourRooms:
      case MinigridTask::kPlayground: {
        const int mid = s / 2;
        for (int i = 1; i <= s - 2; ++i) {
          g.set({mid, i}, cell::kWall);
          g.set({i, mid}, cell::kWall);
        }
        auto pick = [&](int lo, int hi) { return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))); };
        g.set({mid, pick(1, mid - 1)}, cell::kEmpty);
        g.set({mid, pick(mid + 1, s - 2)}, cell::kEmpty);
        g.set({pick(1, mid - 1), mid}, cell::kEmpty);
        g.set({pick(mid + 1, s - 2), mid}, cell::kEmpty);
        layout.agent = random_cell(1, s - 2, 1, s - 2);
        if (kinds_.at(task) == MinigridTask::kFourRooms) {
          g.set(random_cell(1, s - 2, 1, s - 2), cell::kGoal);
        } else {
          for (auto code : {cell::kBall, cell::kBox, cell::kKey}) g.set(random_cell(1, s - 2, 1, s - 2), code);
        }
        break;
      }
      case MinigridTask::kMultiRoom: {
        const int rooms = config_.multiroom_rooms;
        std::vector<int> walls;
        for (int i = 1; i < rooms; ++i) walls.push_back(i * (s - 1) / rooms);
        for (int w : walls) {
          for (int r = 1; r <= s - 2; ++r) g.set({r, w}, cell::kWall);
          g.set({1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(s - 2))), w}, cell::kDoorClosed);
        }
        layout.agent = random_cell(1, s - 2, 1, walls.front() - 1);
        g.set(random_cell(1, s - 2, walls.back() + 1, s - 2), cell::kGoal);
        break;
      }
    }
    return layout;
  }

  [[nodiscard]] std::unique_ptr<GridWorldEnv> clone_grid() const override {
    return std::make_unique<MinigridEnv>(*this);
  }

  [[nodiscard]] bool task_complete() const override {
    if (kinds_.at(task_) == MinigridTask::kPlayground) {
      int carried = 0;
      for (int n : inventory_) carried += n;
      return spawned_objects_ > 0 && carried >= spawned_objects_;
    }
    return grid_.at(agent_) == cell::kGoal;
  }

  std::optional<std::vector<int>> plan_from_current() override {
    if (kinds_.at(task_) != MinigridTask::kPlayground) return plan_reach_goal();
    std::vector<int> plan;
    auto is_object = [&](GridPos q) {
      auto c = grid_.at(q);
      return c == cell::kBall || c == cell::kBox || c == cell::kKey;
    };
    while (!done_) {
      if (!interact(is_object, kPickup, plan)) return std::nullopt;
    }
    if (!task_complete()) return std::nullopt;
    return plan;
  }

 private:
  MinigridConfig config_;
  std::vector<MinigridTask> kinds_;
};

}  // namespace hap::envs

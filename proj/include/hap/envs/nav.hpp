#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "hap/envs/gridworld.hpp"

namespace hap::envs {

/// Four independent navigation tasks over one walled room. Every
/// `barrier_spacing`-th row is a wall with a single gap, alternating between
/// the right and left ends, so the room folds into a serpentine corridor.
/// The goal cell is fixed; each task starts the agent at a seed-chosen cell
/// whose shortest-path distance to the goal is that task's length.
struct NavConfig {
  int interior = 6;         ///< side of the room, outer walls excluded
  int barrier_spacing = 3;  ///< 0 = open room
  GridPos goal{1, 1};
  std::array<int, 4> lengths{2, 5, 9, 13};
  int step_cap = 200;
  RewardConfig reward;
};

inline TaskSpace nav_space() {
  return TaskSpace({{"simple", Tier::kEasy}, {"mid", Tier::kMiddle}, {"hard", Tier::kHard}, {"extremely_hard", Tier::kHard}});
}

class NavEnv final : public GridWorldEnv {
 public:
  explicit NavEnv(NavConfig config = {})
      : GridWorldEnv(nav_space(), config.interior + 2, config.interior + 2, /*code_count=*/3, /*actions=*/4,
                     config.step_cap, config.reward, /*inventory=*/0),
        config_(config) {
    const GridPos g = config_.goal;
    require(g.row >= 1 && g.row <= config_.interior && g.col >= 1 && g.col <= config_.interior,
            "nav: goal outside the room");
    turn_on_move_ = false;
    require(config_.barrier_spacing == 0 || config_.barrier_spacing >= 2, "nav: barrier spacing must be 0 or >= 2");
    room_ = Grid(rows_, cols_);
    room_.frame(cell::kWall);
    int barrier = 0;
    for (int r = config_.barrier_spacing; config_.barrier_spacing > 0 && r < config_.interior;
         r += config_.barrier_spacing, ++barrier) {
      for (int c = 1; c <= config_.interior; ++c) room_.set({r, c}, cell::kWall);
      room_.set({r, barrier % 2 == 0 ? config_.interior : 1}, cell::kEmpty);
    }
    require(room_.at(g) == cell::kEmpty, "nav: goal inside a wall");
    room_.set(g, cell::kGoal);
    for (int length : config_.lengths)
      require(!starts_at(length).empty(), "nav: no start cell at distance " + std::to_string(length));
  }

  [[nodiscard]] std::string id() const override { return "nav"; }
  [[nodiscard]] std::unique_ptr<Environment> clone() const override { return std::make_unique<NavEnv>(*this); }
  [[nodiscard]] const NavConfig& config() const { return config_; }

  /// Open cells exactly `length` shortest-path steps from the goal, in row-major order.
  [[nodiscard]] std::vector<GridPos> starts_at(int length) const {
    std::vector<GridPos> out;
    auto open = [&](GridPos p) { return room_.at(p) != cell::kWall; };
    for (int r = 1; r <= config_.interior; ++r)
      for (int c = 1; c <= config_.interior; ++c)
        if (open({r, c}) && bfs_distance(room_, {r, c}, config_.goal, open) == length) out.push_back({r, c});
    return out;
  }

 protected:
  [[nodiscard]] GridLayout generate(std::size_t task, std::uint64_t seed) const override {
    RngStream rng(seed);
    GridLayout layout{room_, {}, kUp};
    const auto starts = starts_at(config_.lengths[task]);
    layout.agent = starts[rng.below(starts.size())];
    return layout;
  }

  [[nodiscard]] std::unique_ptr<GridWorldEnv> clone_grid() const override { return std::make_unique<NavEnv>(*this); }

 private:
  NavConfig config_;
  Grid room_;
};

}  // namespace hap::envs

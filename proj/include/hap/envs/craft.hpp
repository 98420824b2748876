#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hap/core/error.hpp"
#include "hap/core/rng.hpp"
#include "hap/envs/environment.hpp"
#include "hap/envs/grid.hpp"

namespace hap::envs {

/// Items of the crafting world. Primitives are mined from resource cells; the
/// rest are produced at workshops.
namespace item {
enum : int {
  kGrass = 0,
  kWood,
  kRock,
  kIron,
  kGold,
  kGem,
  kStick,
  kPlank,
  kRope,
  kCloth,
  kAxe,
  kBench,
  kArrow,
  kKnife,
  kShears,
  kSlingshot,
  kBed,
  kBow,
  kBridge,
  kBundle,
  kFlag,
  kGoldArrow,
  kHammer,
  kLadder,
  kCount
};
inline constexpr int kPrimitiveCount = 6;

inline const char* name(int i) {
  static constexpr const char* kNames[kCount] = {"grass", "wood",  "rock",   "iron",   "gold",     "gem",
                                                 "stick", "plank", "rope",   "cloth",  "axe",      "bench",
                                                 "arrow", "knife", "shears", "slingshot", "bed",   "bow",
                                                 "bridge", "bundle", "flag", "goldarrow", "hammer", "ladder"};
  return kNames[i];
}
}  // namespace item

/// Cell codes: empty, wall, one resource per primitive item, three workshops.
namespace craft_cell {
enum : std::uint8_t { kEmpty = 0, kWall, kResource0, kWorkshop0 = kResource0 + item::kPrimitiveCount, kCount = kWorkshop0 + 3 };
inline constexpr std::uint8_t resource(int primitive) { return static_cast<std::uint8_t>(kResource0 + primitive); }
inline constexpr std::uint8_t workshop(int w) { return static_cast<std::uint8_t>(kWorkshop0 + w); }
}  // namespace craft_cell

struct Recipe {
  int output;
  int workshop;
  std::vector<std::pair<int, int>> inputs;  ///< (item, count), consumed
};

/// Recipe table, one recipe per craftable item.
inline const std::vector<Recipe>& craft_recipes() {
  using namespace item;
  static const std::vector<Recipe> kRecipes = {
      {kPlank, 0, {{kWood, 1}}},
      {kRope, 0, {{kGrass, 1}}},
      {kAxe, 0, {{kStick, 1}, {kIron, 1}}},
      {kBundle, 0, {{kRope, 1}, {kStick, 1}}},
      {kFlag, 0, {{kStick, 1}, {kCloth, 1}}},
      {kStick, 1, {{kWood, 1}}},
      {kBench, 1, {{kPlank, 2}}},
      {kArrow, 1, {{kStick, 1}, {kRock, 1}}},
      {kShears, 1, {{kStick, 1}, {kIron, 1}}},
      {kBed, 1, {{kPlank, 1}, {kCloth, 1}}},
      {kBow, 1, {{kStick, 1}, {kRope, 1}}},
      {kGoldArrow, 1, {{kArrow, 1}, {kGold, 1}}},
      {kCloth, 2, {{kGrass, 1}}},
      {kKnife, 2, {{kStick, 1}, {kIron, 1}}},
      {kSlingshot, 2, {{kStick, 1}, {kRope, 1}}},
      {kBridge, 2, {{kPlank, 1}, {kIron, 1}}},
      {kHammer, 2, {{kStick, 1}, {kRock, 1}, {kIron, 1}}},
      {kLadder, 2, {{kPlank, 1}, {kRope, 1}}},
  };
  return kRecipes;
}

inline const Recipe* recipe_for(int output) {
  for (const auto& r : craft_recipes())
    if (r.output == output) return &r;
  return nullptr;
}

/// Tool held (not consumed) to mine a primitive, or -1.
inline int mining_tool(int primitive) {
  if (primitive == item::kGold) return item::kIron;
  if (primitive == item::kGem) return item::kAxe;
  return -1;
}

struct CraftTaskDef {
  const char* name;
  int target;
  Tier tier;
};

inline const std::vector<CraftTaskDef>& craft_task_defs() {
  using namespace item;
  static const std::vector<CraftTaskDef> kDefs = {
      {"get[grass]", kGrass, Tier::kEasy},          {"get[wood]", kWood, Tier::kEasy},
      {"make[stick]", kStick, Tier::kEasy},         {"make[plank]", kPlank, Tier::kEasy},
      {"get[rock]", kRock, Tier::kEasy},            {"get[iron]", kIron, Tier::kMiddle},
      {"get[gold]", kGold, Tier::kMiddle},          {"make[axe]", kAxe, Tier::kMiddle},
      {"make[bench]", kBench, Tier::kMiddle},       {"make[rope]", kRope, Tier::kMiddle},
      {"make[arrow]", kArrow, Tier::kMiddle},       {"make[knife]", kKnife, Tier::kMiddle},
      {"make[shears]", kShears, Tier::kMiddle},     {"make[slingshot]", kSlingshot, Tier::kMiddle},
      {"make[cloth]", kCloth, Tier::kMiddle},       {"get[gem]", kGem, Tier::kHard},
      {"make[bed]", kBed, Tier::kHard},             {"make[bow]", kBow, Tier::kHard},
      {"make[bridge]", kBridge, Tier::kHard},       {"make[bundle]", kBundle, Tier::kHard},
      {"make[flag]", kFlag, Tier::kHard},           {"make[goldarrow]", kGoldArrow, Tier::kHard},
      {"make[hammer]", kHammer, Tier::kHard},       {"make[ladder]", kLadder, Tier::kHard},
  };
  return kDefs;
}

/// Direct prerequisite items of `target`: recipe inputs or the mining tool.
inline std::vector<int> craft_requirements(int target) {
  std::vector<int> out;
  if (const auto* r = recipe_for(target)) {
    for (const auto& [it, n] : r->inputs) out.push_back(it);
  } else if (int tool = mining_tool(target); tool >= 0) {
    out.push_back(tool);
  }
  return out;
}

/// All 24 crafting tasks; an edge links a task to the task producing each of its requirements.
inline TaskSpace craft_space() {
  const auto& defs = craft_task_defs();
  std::vector<TaskInfo> tasks;
  std::map<int, std::size_t> by_item;
  for (std::size_t i = 0; i < defs.size(); ++i) {
    tasks.push_back({defs[i].name, defs[i].tier});
    by_item[defs[i].target] = i;
  }
  std::vector<TaskSpace::Edge> edges;
  for (std::size_t i = 0; i < defs.size(); ++i)
    for (int req : craft_requirements(defs[i].target)) edges.emplace_back(i, by_item.at(req));
  return TaskSpace(std::move(tasks), std::move(edges));
}

struct CraftConfig {
  int size = 12;  ///< canvas side including the outer wall
  std::array<int, item::kPrimitiveCount> resource_counts{3, 4, 3, 3, 2, 2};
  int step_cap = 1000;
  bool egocentric = true;
  RewardConfig reward;
};

/// Crafting world. The agent walks the open map, and "use" on the faced cell
/// mines a resource (if the tool is held) or crafts at a workshop. At a
/// workshop the current task's target is crafted when satisfiable; otherwise
/// the first satisfiable recipe of that workshop in table order. Success is
/// holding the task's target item. World generation ignores the task.
class CraftEnv final : public Environment {
 public:
  static constexpr int kUse = 4;

  explicit CraftEnv(CraftConfig config = {}, const std::vector<std::string>& task_names = {})
      : config_(config),
        tasks_(task_names.empty() ? craft_space() : craft_space().subset(task_names)),
        grid_(config.size, config.size) {
    int needed = 3;
    for (int n : config_.resource_counts) {
      require(n >= 0, "craft: negative resource count");
      needed += n;
    }
    require(config_.size >= 5, "craft: canvas too small");
    require(needed + 1 <= (config_.size - 2) * (config_.size - 2), "craft: map too small for its contents");
    require(config_.step_cap > 0, "craft: step cap must be positive");
    const auto full = craft_space();
    for (std::size_t i = 0; i < tasks_.size(); ++i)
      targets_.push_back(craft_task_defs()[full.index_of(tasks_.name(i))].target);
    inventory_.assign(item::kCount, 0);
  }

  [[nodiscard]] std::string id() const override { return "craft"; }
  [[nodiscard]] const TaskSpace& tasks() const override { return tasks_; }
  [[nodiscard]] int action_count() const override { return 5; }
  [[nodiscard]] std::vector<std::string> action_names() const override {
    return {"up", "right", "down", "left", "use"};
  }
  [[nodiscard]] int step_cap() const override { return config_.step_cap; }
  [[nodiscard]] std::unique_ptr<Environment> clone() const override { return std::make_unique<CraftEnv>(*this); }
  [[nodiscard]] const CraftConfig& config() const { return config_; }
  [[nodiscard]] int target(std::size_t task) const { return targets_.at(task); }
  [[nodiscard]] const Grid& grid() const { return grid_; }
  [[nodiscard]] GridPos agent() const { return agent_; }
  [[nodiscard]] const std::vector<int>& inventory() const { return inventory_; }

  [[nodiscard]] ObservationEncoder encoder() const override {
    ObservationEncoder enc;
    enc.rows = config_.size;
    enc.cols = config_.size;
    enc.code_count = craft_cell::kCount;
    enc.wall_code = craft_cell::kWall;
    enc.inventory_size = item::kCount;
    enc.task_count = tasks_.size();
    enc.egocentric = config_.egocentric;
    return enc;
  }

  Observation reset(std::size_t task, std::uint64_t seed) override {
    if (task >= tasks_.size()) throw DomainError("reset: unknown task index " + std::to_string(task));
    seed_ = seed;
    task_ = task;
    RngStream rng(seed);
    const int s = config_.size;
    std::vector<GridPos> free;
    for (int r = 1; r < s - 1; ++r)
      for (int c = 1; c < s - 1; ++c) free.push_back({r, c});
    // Resample until every workshop and resource touches the agent's open region.
    for (;;) {
      grid_ = Grid(s, s);
      grid_.frame(craft_cell::kWall);
      rng.shuffle(free);
      std::size_t next = 0;
      for (int w = 0; w < 3; ++w) grid_.set(free[next++], craft_cell::workshop(w));
      for (int p = 0; p < item::kPrimitiveCount; ++p)
        for (int k = 0; k < config_.resource_counts[static_cast<std::size_t>(p)]; ++k)
          grid_.set(free[next++], craft_cell::resource(p));
      agent_ = free[next];
      if (all_reachable()) break;
    }
    facing_ = static_cast<int>(rng.below(4));
    inventory_.assign(item::kCount, 0);
    steps_ = 0;
    done_ = false;
    return observation();
  }

  StepResult step(int action) override {
    require(!done_, "step: episode already finished");
    require(action >= 0 && action < 5, "step: action id out of range");
    ++steps_;
    StepResult result;
    result.reward = -config_.reward.step_penalty;
    if (action < 4) {
      facing_ = action;
      const GridPos t = moved(agent_, action);
      if (grid_.inside(t) && grid_.at(t) == craft_cell::kEmpty) {
        agent_ = t;
      } else {
        result.events.blocked = true;
      }
    } else {
      const GridPos t = moved(agent_, facing_);
      const std::uint8_t code = grid_.inside(t) ? grid_.at(t) : std::uint8_t{craft_cell::kWall};
      if (code >= craft_cell::kResource0 && code < craft_cell::kWorkshop0) {
        const int prim = code - craft_cell::kResource0;
        const int tool = mining_tool(prim);
        if (tool < 0 || inventory_[static_cast<std::size_t>(tool)] > 0) {
          ++inventory_[static_cast<std::size_t>(prim)];
          grid_.set(t, craft_cell::kEmpty);
          result.events.picked_up = true;
        }
      } else if (code >= craft_cell::kWorkshop0 && code < craft_cell::kCount) {
        if (const Recipe* r = craftable(code - craft_cell::kWorkshop0)) {
          for (const auto& [it, n] : r->inputs) inventory_[static_cast<std::size_t>(it)] -= n;
          ++inventory_[static_cast<std::size_t>(r->output)];
          result.events.crafted = true;
        }
      }
    }
    if (inventory_[static_cast<std::size_t>(targets_[task_])] > 0) {
      result.reward += config_.reward.success_reward;
      result.success = true;
      result.terminated = true;
      done_ = true;
    }
    if (!done_ && steps_ >= config_.step_cap) done_ = true;
    result.done = done_;
    result.obs = observation();
    return result;
  }

  [[nodiscard]] Observation observation() const override {
    Observation obs;
    obs.rows = config_.size;
    obs.cols = config_.size;
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

  [[nodiscard]] std::string render_rows() const override {
    static constexpr char kGlyph[craft_cell::kCount] = {'.', '#', 'g', 'w', 'r', 'i', '$', '*', '0', '1', '2'};
    static constexpr char kAgent[4] = {'^', '>', 'v', '<'};
    std::string out;
    for (int r = 0; r < config_.size; ++r) {
      for (int c = 0; c < config_.size; ++c)
        out += (GridPos{r, c} == agent_) ? kAgent[facing_] : kGlyph[grid_.at({r, c})];
      out += '\n';
    }
    out += "inventory";
    for (int i = 0; i < item::kCount; ++i)
      if (inventory_[static_cast<std::size_t>(i)] > 0)
        out += std::string(" ") + item::name(i) + "=" + std::to_string(inventory_[static_cast<std::size_t>(i)]);
    out += '\n';
    return out;
  }

  /// Depth-first topological plan: obtain each requirement in recipe order, then mine or craft the target.
  [[nodiscard]] std::optional<std::vector<int>> oracle_plan(std::size_t task, std::uint64_t seed) const override {
    CraftEnv sim(*this);
    sim.reset(task, seed);
    std::vector<int> plan;
    if (!sim.obtain(sim.targets_[task], plan)) return std::nullopt;
    return plan;
  }

  /// The ordered list of items the oracle obtains for `task` (each requirement before its consumer).
  [[nodiscard]] std::vector<int> oracle_item_order(std::size_t task) const {
    std::vector<int> order;
    std::function<void(int)> visit = [&](int it) {
      if (const Recipe* r = recipe_for(it)) {
        for (const auto& [in, n] : r->inputs)
          for (int k = 0; k < n; ++k) visit(in);
      } else if (int tool = mining_tool(it); tool >= 0) {
        visit(tool);
      }
      order.push_back(it);
    };
    visit(targets_.at(task));
    return order;
  }

 private:
  [[nodiscard]] bool all_reachable() const {
    const int s = config_.size;
    std::vector<char> open(static_cast<std::size_t>(s * s), 0);
    std::vector<GridPos> stack{agent_};
    open[static_cast<std::size_t>(agent_.row * s + agent_.col)] = 1;
    while (!stack.empty()) {
      GridPos p = stack.back();
      stack.pop_back();
      for (int d = 0; d < 4; ++d) {
        GridPos q = moved(p, d);
        auto& seen = open[static_cast<std::size_t>(q.row * s + q.col)];
        if (!seen && grid_.at(q) == craft_cell::kEmpty) {
          seen = 1;
          stack.push_back(q);
        }
      }
    }
    for (int r = 1; r < s - 1; ++r)
      for (int c = 1; c < s - 1; ++c) {
        if (grid_.at({r, c}) == craft_cell::kEmpty) continue;
        bool touched = false;
        for (int d = 0; d < 4; ++d) {
          GridPos q = moved({r, c}, d);
          touched = touched || open[static_cast<std::size_t>(q.row * s + q.col)];
        }
        if (!touched) return false;
      }
    return true;
  }

  [[nodiscard]] const Recipe* craftable(int workshop) const {
    auto ok = [&](const Recipe& r) {
      if (r.workshop != workshop) return false;
      for (const auto& [it, n] : r.inputs)
        if (inventory_[static_cast<std::size_t>(it)] < n) return false;
      return true;
    };
    if (const Recipe* t = recipe_for(targets_[task_]); t && ok(*t)) return t;
    for (const auto& r : craft_recipes())
      if (ok(r)) return &r;
    return nullptr;
  }

  bool act(int a, std::vector<int>& plan) {
    if (done_) return false;
    plan.push_back(a);
    step(a);
    return true;
  }

  /// Walk beside a cell with `code`, face it and use it.
  bool use_nearest(std::uint8_t code, std::vector<int>& plan) {
    auto free = [&](GridPos p) { return grid_.at(p) == craft_cell::kEmpty; };
    auto beside = [&](GridPos p) {
      for (int d = 0; d < 4; ++d)
        if (grid_.at(moved(p, d)) == code) return true;
      return false;
    };
    auto route = bfs_route(grid_, agent_, free, beside);
    if (!route) return false;
    for (int d : *route)
      if (!act(d, plan)) return false;
    for (int d = 0; d < 4; ++d)
      if (grid_.at(moved(agent_, d)) == code) {
        if (facing_ != d && !act(d, plan)) return false;
        return act(kUse, plan);
      }
    return false;
  }

  bool obtain(int it, std::vector<int>& plan) {
    const int before = inventory_[static_cast<std::size_t>(it)];
    if (const Recipe* r = recipe_for(it)) {
      for (const auto& [in, n] : r->inputs)
        for (int k = 0; k < n; ++k)
          if (!obtain(in, plan)) return false;
      if (!use_nearest(craft_cell::workshop(r->workshop), plan)) return done_ && success();
    } else {
      if (int tool = mining_tool(it); tool >= 0 && inventory_[static_cast<std::size_t>(tool)] == 0)
        if (!obtain(tool, plan)) return false;
      if (!use_nearest(craft_cell::resource(it), plan)) return done_ && success();
    }
    return inventory_[static_cast<std::size_t>(it)] > before || success();
  }

  [[nodiscard]] bool success() const { return inventory_[static_cast<std::size_t>(targets_[task_])] > 0; }

  CraftConfig config_;
  TaskSpace tasks_;
  std::vector<int> targets_;
  Grid grid_;
  GridPos agent_;
  int facing_ = kUp;
  std::vector<int> inventory_;
  std::size_t task_ = 0;
  int steps_ = 0;
  bool done_ = false;
};

}  // namespace hap::envs

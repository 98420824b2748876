#include <gtest/gtest.h>

#include <set>

#include "hap/envs/registry.hpp"

using namespace hap;
using namespace hap::envs;

namespace {

GridPos goal_of(const Grid& g) { return g.cells_with(cell::kGoal).at(0); }

void expect_solvable_everywhere(const Environment& env, int seeds) {
  for (std::size_t t = 0; t < env.tasks().size(); ++t)
    for (int s = 0; s < seeds; ++s)
      ASSERT_TRUE(env.solvable(t, static_cast<std::uint64_t>(s))) << env.tasks().name(t) << " seed " << s;
}

}  // namespace

TEST(TaskSpaces, NavHasFourIndependentTasks) {
  auto s = nav_space();
  EXPECT_EQ(s.size(), 4u);
  EXPECT_TRUE(s.edges().empty());
  EXPECT_EQ(s.name(3), "extremely_hard");
}

TEST(TaskSpaces, MinigridTiers) {
  auto s = minigrid_space();
  ASSERT_EQ(s.size(), 6u);
  EXPECT_TRUE(s.edges().empty());
  auto names = [&](Tier t) {
    std::set<std::string> out;
    for (auto i : s.in_tier(t)) out.insert(s.name(i));
    return out;
  };
  EXPECT_EQ(names(Tier::kEasy), (std::set<std::string>{"Empty", "Crossing"}));
  EXPECT_EQ(names(Tier::kMiddle), (std::set<std::string>{"DoorKey", "FourRooms"}));
  EXPECT_EQ(names(Tier::kHard), (std::set<std::string>{"MultiRoom", "Playground"}));
}

TEST(TaskSpaces, CraftDagIsAcyclicAndTierMonotone) {
  auto s = craft_space();
  EXPECT_EQ(s.size(), 24u);
  EXPECT_TRUE(s.is_acyclic());
  for (const auto& [task, pre] : s.edges()) EXPECT_LE(static_cast<int>(s.tier(pre)), static_cast<int>(s.tier(task)));
  auto has_edge = [&](const std::string& t, const std::string& p) {
    for (const auto& e : s.edges())
      if (e.first == s.index_of(t) && e.second == s.index_of(p)) return true;
    return false;
  };
  EXPECT_TRUE(has_edge("make[stick]", "get[wood]"));
  EXPECT_TRUE(has_edge("make[bridge]", "make[plank]"));
  EXPECT_TRUE(has_edge("make[bridge]", "get[iron]"));
}

TEST(TaskSpaces, CycleAndDuplicatesRejected) {
  EXPECT_THROW(TaskSpace({{"a", Tier::kEasy}, {"b", Tier::kEasy}}, {{0, 1}, {1, 0}}), ConfigError);
  EXPECT_THROW(TaskSpace({{"a", Tier::kEasy}, {"a", Tier::kEasy}}), ConfigError);
  EXPECT_THROW(TaskSpace(std::vector<TaskInfo>{}), ConfigError);
}

TEST(TaskSpaces, SubsetKeepsInternalEdges) {
  auto s = craft_space().subset({"get[wood]", "make[stick]", "make[plank]"});
  EXPECT_EQ(s.size(), 3u);
  EXPECT_EQ(s.edges().size(), 2u);
  EXPECT_EQ(s.prerequisites(1), std::vector<std::size_t>{0});
}

TEST(Nav, StartDistanceMatchesConfiguredLength) {
  NavEnv env;
  for (std::size_t t = 0; t < 4; ++t)
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      auto obs = env.reset(t, seed);
      EXPECT_EQ(bfs_distance(env.grid(), obs.agent, goal_of(env.grid()),
                             [&](GridPos p) { return GridWorldEnv::walkable(env.grid().at(p)); }),
                env.config().lengths[t]);
    }
}

TEST(Nav, BarrierRowsHaveOneAlternatingGap) {
  NavEnv env;
  env.reset(0, 0);
  const auto& c = env.config();
  int barrier = 0;
  for (int r = c.barrier_spacing; r < c.interior; r += c.barrier_spacing, ++barrier) {
    std::vector<int> gaps;
    for (int col = 1; col <= c.interior; ++col)
      if (env.grid().at({r, col}) != cell::kWall) gaps.push_back(col);
    EXPECT_EQ(gaps, std::vector<int>{barrier % 2 == 0 ? c.interior : 1}) << "row " << r;
  }
  EXPECT_GT(barrier, 0);
}

TEST(Nav, BadConfigRejected) {
  NavConfig c;
  c.lengths = {2, 5, 9, 400};
  EXPECT_THROW(NavEnv{c}, ContractViolation);
  NavConfig d;
  d.barrier_spacing = 1;
  EXPECT_THROW(NavEnv{d}, ContractViolation);
}

TEST(Nav, SameSeedSameObservation) {
  NavEnv a, b;
  EXPECT_EQ(a.reset(2, 17), b.reset(2, 17));
  auto ra = a.step(kMoveLeft), rb = b.step(kMoveLeft);
  EXPECT_EQ(ra.obs, rb.obs);
  EXPECT_EQ(ra.reward, rb.reward);
}

TEST(Nav, TwoStepEpisodeRewards) {
  NavEnv env;
  GridLayout layout{Grid(8, 8), {3, 1}, kUp};
  layout.grid.frame(cell::kWall);
  layout.grid.set({1, 1}, cell::kGoal);
  env.load_layout(0, layout);
  auto r1 = env.step(kMoveUp);
  EXPECT_DOUBLE_EQ(r1.reward, -0.001);
  EXPECT_FALSE(r1.done);
  auto r2 = env.step(kMoveUp);
  EXPECT_DOUBLE_EQ(r2.reward, 1.0 - 0.001);
  EXPECT_TRUE(r2.done);
  EXPECT_TRUE(r2.success);
  EXPECT_THROW(env.step(kMoveUp), ContractViolation);
}

TEST(Nav, BlockedMoveKeepsPositionAndCostsPenalty) {
  NavEnv env;
  GridLayout layout{Grid(8, 8), {1, 5}, kUp};
  layout.grid.frame(cell::kWall);
  layout.grid.set({1, 1}, cell::kGoal);
  env.load_layout(0, layout);
  auto r = env.step(kMoveUp);
  EXPECT_EQ(r.obs.agent, (GridPos{1, 5}));
  EXPECT_TRUE(r.events.blocked);
  EXPECT_DOUBLE_EQ(r.reward, -0.001);
}

TEST(Nav, CapTruncatesWithoutSuccess) {
  NavConfig c;
  c.step_cap = 5;
  NavEnv env(c);
  env.reset(3, 0);
  StepResult r;
  for (int i = 0; i < 5; ++i) r = env.step(i % 2 == 0 ? kMoveRight : kMoveLeft);
  EXPECT_TRUE(r.done);
  EXPECT_FALSE(r.success);
  EXPECT_FALSE(r.terminated);
}

TEST(Nav, UnknownTaskIsDomainError) {
  NavEnv env;
  EXPECT_THROW(env.reset(4, 0), DomainError);
  EXPECT_THROW((void)env.solvable(9, 0), DomainError);
}

TEST(Nav, AllSeedsSolvable) { expect_solvable_everywhere(NavEnv(), 1000); }

TEST(Minigrid, AllSeedsSolvable) { expect_solvable_everywhere(MinigridEnv(), 1000); }

TEST(Minigrid, DoorKeyWithKeyBehindDoorIsUnsolvable) {
  MinigridEnv env;
  const auto task = env.tasks().index_of("DoorKey");
  GridLayout layout{Grid(9, 9), {1, 1}, kRight};
  layout.grid.frame(cell::kWall);
  for (int r = 1; r <= 7; ++r) layout.grid.set({r, 4}, cell::kWall);
  layout.grid.set({3, 4}, cell::kDoorLocked);
  layout.grid.set({2, 6}, cell::kKey);
  layout.grid.set({7, 7}, cell::kGoal);
  env.load_layout(task, layout);
  EXPECT_FALSE(env.oracle_from_state().has_value());
}

TEST(Minigrid, LockedDoorNeedsKey) {
  MinigridEnv env;
  GridLayout layout{Grid(9, 9), {1, 1}, kRight};
  layout.grid.frame(cell::kWall);
  layout.grid.set({1, 2}, cell::kDoorLocked);
  layout.grid.set({2, 1}, cell::kKey);
  layout.grid.set({7, 7}, cell::kGoal);
  env.load_layout(env.tasks().index_of("DoorKey"), layout);
  env.step(kToggle);
  EXPECT_EQ(env.grid().at({1, 2}), cell::kDoorLocked);
  env.step(kMoveDown);  // blocked by key, turns to face it
  auto r = env.step(kPickup);
  EXPECT_TRUE(r.events.picked_up);
  env.step(kMoveRight);  // blocked by the door, faces it
  r = env.step(kToggle);
  EXPECT_TRUE(r.events.opened);
  EXPECT_EQ(env.grid().at({1, 2}), cell::kDoorOpen);
}

TEST(Minigrid, LavaEndsEpisodeWithoutSuccess) {
  MinigridEnv env;
  GridLayout layout{Grid(9, 9), {1, 1}, kRight};
  layout.grid.frame(cell::kWall);
  layout.grid.set({1, 2}, cell::kLava);
  layout.grid.set({7, 7}, cell::kGoal);
  env.load_layout(env.tasks().index_of("Crossing"), layout);
  auto r = env.step(kMoveRight);
  EXPECT_TRUE(r.done);
  EXPECT_TRUE(r.terminated);
  EXPECT_FALSE(r.success);
  EXPECT_TRUE(r.events.hazard);
}

TEST(Minigrid, PlaygroundSuccessNeedsEveryObject) {
  MinigridEnv env;
  const auto t = env.tasks().index_of("Playground");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto plan = env.oracle_plan(t, seed);
    ASSERT_TRUE(plan);
    MinigridEnv sim;
    sim.reset(t, seed);
    int pickups = 0;
    StepResult r;
    for (int a : *plan) {
      r = sim.step(a);
      pickups += r.events.picked_up;
    }
    EXPECT_TRUE(r.success);
    EXPECT_EQ(pickups, 3);
  }
}

TEST(Minigrid, SubsetOrdersTasks) {
  MinigridEnv env({}, {"Empty", "DoorKey", "MultiRoom"});
  ASSERT_EQ(env.tasks().size(), 3u);
  EXPECT_EQ(env.kind(2), MinigridTask::kMultiRoom);
  expect_solvable_everywhere(env, 100);
}

TEST(Craft, EveryTaskSolvableOverThousandSeeds) { expect_solvable_everywhere(CraftEnv(), 1000); }

TEST(Craft, PlankWorldHasWoodAndWorkshop) {
  CraftEnv env;
  const auto t = env.tasks().index_of("make[plank]");
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    env.reset(t, seed);
    EXPECT_FALSE(env.grid().cells_with(craft_cell::resource(item::kWood)).empty());
    EXPECT_EQ(env.grid().cells_with(craft_cell::workshop(recipe_for(item::kPlank)->workshop)).size(), 1u);
  }
}

TEST(Craft, GoldArrowPlanRespectsPrerequisites) {
  CraftEnv env;
  const auto task = env.tasks().index_of("make[goldarrow]");
  auto order = env.oracle_item_order(task);
  auto pos = [&](int it) { return std::find(order.begin(), order.end(), it) - order.begin(); };
  EXPECT_LT(pos(item::kWood), pos(item::kStick));
  EXPECT_LT(pos(item::kStick), pos(item::kArrow));
  EXPECT_LT(pos(item::kRock), pos(item::kArrow));
  EXPECT_LT(pos(item::kIron), pos(item::kGold));
  EXPECT_LT(pos(item::kArrow), pos(item::kGoldArrow));
  EXPECT_LT(pos(item::kGold), pos(item::kGoldArrow));
  EXPECT_EQ(order.back(), item::kGoldArrow);

  // Replaying the plan acquires items in that order.
  auto plan = env.oracle_plan(task, 3);
  ASSERT_TRUE(plan);
  env.reset(task, 3);
  std::vector<int> acquired;
  for (int a : *plan) {
    auto before = env.inventory();
    env.step(a);
    for (int i = 0; i < item::kCount; ++i)
      if (env.inventory()[static_cast<std::size_t>(i)] > before[static_cast<std::size_t>(i)]) acquired.push_back(i);
  }
  EXPECT_EQ(acquired, order);
}

TEST(Craft, GoldNeedsIronHeld) {
  CraftEnv env;
  env.reset(env.tasks().index_of("get[gold]"), 0);
  auto gold = env.grid().cells_with(craft_cell::resource(item::kGold)).at(0);
  (void)gold;
  EXPECT_EQ(mining_tool(item::kGold), item::kIron);
  EXPECT_EQ(mining_tool(item::kGem), item::kAxe);
  EXPECT_EQ(mining_tool(item::kWood), -1);
}

TEST(Encoder, WidthConstantAndTaskOneHot) {
  for (const char* id : {"nav", "minigrid", "craft"}) {
    EnvOptions o;
    o.id = id;
    auto env = make_environment(o);
    auto enc = env->encoder();
    for (std::size_t t = 0; t < env->tasks().size(); ++t) {
      auto obs = env->reset(t, 5);
      auto dense = enc.encode_dense(obs);
      EXPECT_EQ(dense.size(), enc.width());
      double task_sum = 0;
      for (std::size_t i = enc.state_width(); i < enc.width(); ++i) task_sum += dense[i];
      EXPECT_EQ(task_sum, 1.0);
      EXPECT_EQ(dense[enc.state_width() + t], 1.0);
    }
  }
}

TEST(Trajectory, ReturnRecomputable) {
  Trajectory tr;
  tr.gamma = 0.9;
  for (double r : {-0.001, -0.001, 0.999}) tr.steps.push_back({{}, 0, r, 0.0});
  tr.discounted_return = -0.001 - 0.9 * 0.001 + 0.81 * 0.999;
  EXPECT_NEAR(tr.recompute_return(), tr.discounted_return, 1e-12);
}

TEST(Environment, TranscriptIsPureFunctionOfSeedAndActions) {
  for (const char* id : {"nav", "minigrid", "craft"}) {
    EnvOptions o;
    o.id = id;
    auto a = make_environment(o), b = make_environment(o);
    RngStream rng(1);
    std::vector<int> actions;
    for (int i = 0; i < 60; ++i) actions.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(a->action_count()))));
    const auto task = a->tasks().size() - 1;
    EXPECT_EQ(a->reset(task, 8), b->reset(task, 8));
    for (int act : actions) {
      if (a->done()) break;
      auto ra = a->step(act);
      auto rb = b->step(act);
      ASSERT_EQ(ra.obs, rb.obs);
      ASSERT_EQ(ra.reward, rb.reward);
    }
    EXPECT_EQ(a->layout_dump(), b->layout_dump());
  }
}

TEST(Environment, RewardBoundHoldsForRandomPlay) {
  for (const char* id : {"nav", "minigrid", "craft"}) {
    EnvOptions o;
    o.id = id;
    auto env = make_environment(o);
    RngStream rng(2);
    for (int ep = 0; ep < 20; ++ep) {
      const auto task = rng.below(env->tasks().size());
      env->reset(task, static_cast<std::uint64_t>(ep));
      Trajectory tr;
      while (!env->done()) {
        auto r = env->step(static_cast<int>(rng.below(static_cast<std::uint64_t>(env->action_count()))));
        tr.steps.push_back({{}, 0, r.reward, 0.0});
      }
      const double g = tr.recompute_return();
      EXPECT_GE(g, -env->step_cap() * 0.001 - 1e-12);
      EXPECT_LE(g, 1.0);
      EXPECT_LE(static_cast<int>(tr.length()), env->step_cap());
    }
  }
}

TEST(Registry, UnknownEnvironmentIsConfigError) {
  EnvOptions o;
  o.id = "crafter";
  EXPECT_THROW(make_environment(o), ConfigError);
}

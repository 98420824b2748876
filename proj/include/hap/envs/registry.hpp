#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hap/core/error.hpp"
#include "hap/envs/craft.hpp"
#include "hap/envs/minigrid.hpp"
#include "hap/envs/nav.hpp"

namespace hap::envs {

/// Construction options shared by all environments. Zero / negative values keep the environment default.
struct EnvOptions {
  std::string id = "nav";
  std::vector<std::string> tasks;  ///< subset and order (minigrid, craft); empty = all
  int size = 0;                    ///< canvas side (minigrid, craft) or room interior (nav)
  int step_cap = 0;
  double step_penalty = 0.001;
  double success_reward = 1.0;
  int rooms = 0;  ///< minigrid MultiRoom room count
  bool egocentric = true;  ///< craft only
  int barrier_spacing = -1;          ///< nav only; negative keeps the default
  std::vector<std::size_t> lengths;  ///< nav only; four start distances, empty keeps the default
};

inline std::unique_ptr<Environment> make_environment(const EnvOptions& o) {
  RewardConfig reward{o.success_reward, o.step_penalty};
  if (o.id == "nav") {
    if (!o.tasks.empty()) throw ConfigError("nav: task subsets are not supported");
    NavConfig c;
    if (o.size > 0) c.interior = o.size;
    if (o.step_cap > 0) c.step_cap = o.step_cap;
    if (o.barrier_spacing >= 0) c.barrier_spacing = o.barrier_spacing;
    if (!o.lengths.empty()) {
      if (o.lengths.size() != c.lengths.size()) throw ConfigError("nav: env.lengths needs exactly 4 values");
      for (std::size_t i = 0; i < c.lengths.size(); ++i) c.lengths[i] = static_cast<int>(o.lengths[i]);
    }
    c.reward = reward;
    try {
      return std::make_unique<NavEnv>(c);
    } catch (const ContractViolation& e) {
      throw ConfigError(e.what());
    }
  }
  if (o.id == "minigrid") {
    MinigridConfig c;
    if (o.size > 0) c.size = o.size;
    if (o.step_cap > 0) c.step_cap = o.step_cap;
    if (o.rooms > 0) c.multiroom_rooms = o.rooms;
    c.reward = reward;
    return std::make_unique<MinigridEnv>(c, o.tasks);
  }
  if (o.id == "craft") {
    CraftConfig c;
    if (o.size > 0) c.size = o.size;
    if (o.step_cap > 0) c.step_cap = o.step_cap;
    c.egocentric = o.egocentric;
    c.reward = reward;
    return std::make_unique<CraftEnv>(c, o.tasks);
  }
  throw ConfigError("unknown environment '" + o.id + "'");
}

}  // namespace hap::envs

#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hap/core/error.hpp"

namespace hap::envs {

enum class Tier { kEasy = 0, kMiddle = 1, kHard = 2 };

inline std::string_view tier_name(Tier t) {
  switch (t) {
    case Tier::kEasy: return "easy";
    case Tier::kMiddle: return "middle";
    case Tier::kHard: return "hard";
  }
  return "?";
}

struct TaskInfo {
  std::string name;
  Tier tier = Tier::kEasy;
};

/// Ordered task set with difficulty tiers and a prerequisite DAG.
/// The order is stable and defines vector indexing for every teacher.
class TaskSpace {
 public:
  /// (task, prerequisite) pair.
  using Edge = std::pair<std::size_t, std::size_t>;

  TaskSpace() = default;

  TaskSpace(std::vector<TaskInfo> tasks, std::vector<Edge> edges = {})
      : tasks_(std::move(tasks)), edges_(std::move(edges)) {
    if (tasks_.empty()) throw ConfigError("task space: no tasks");
    for (std::size_t i = 0; i < tasks_.size(); ++i)
      for (std::size_t j = i + 1; j < tasks_.size(); ++j)
        if (tasks_[i].name == tasks_[j].name) throw ConfigError("task space: duplicate task " + tasks_[i].name);
    prereqs_.resize(tasks_.size());
    for (const auto& [task, pre] : edges_) {
      if (task >= tasks_.size() || pre >= tasks_.size()) throw ConfigError("task space: edge out of range");
      prereqs_[task].push_back(pre);
    }
    if (!topological_order()) throw ConfigError("task space: prerequisite graph has a cycle");
  }

  [[nodiscard]] std::size_t size() const { return tasks_.size(); }
  [[nodiscard]] const TaskInfo& operator[](std::size_t i) const { return tasks_.at(i); }
  [[nodiscard]] const std::string& name(std::size_t i) const { return tasks_.at(i).name; }
  [[nodiscard]] Tier tier(std::size_t i) const { return tasks_.at(i).tier; }
  [[nodiscard]] const std::vector<TaskInfo>& tasks() const { return tasks_; }
  [[nodiscard]] const std::vector<Edge>& edges() const { return edges_; }
  [[nodiscard]] const std::vector<std::size_t>& prerequisites(std::size_t i) const { return prereqs_.at(i); }

  [[nodiscard]] std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < tasks_.size(); ++i)
      if (tasks_[i].name == name) return i;
    return std::nullopt;
  }

  [[nodiscard]] std::size_t index_of(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw DomainError("unknown task '" + std::string(name) + "'");
  }

  [[nodiscard]] std::vector<std::size_t> in_tier(Tier t) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < tasks_.size(); ++i)
      if (tasks_[i].tier == t) out.push_back(i);
    return out;
  }

  /// Kahn's algorithm; prerequisites come before dependents, ties by task order.
  [[nodiscard]] std::optional<std::vector<std::size_t>> topological_order() const {
    std::vector<std::size_t> indegree(tasks_.size(), 0);
    for (const auto& e : edges_) ++indegree[e.first];
    std::vector<std::size_t> order;
    std::vector<bool> done(tasks_.size(), false);
    while (order.size() < tasks_.size()) {
      bool progressed = false;
      for (std::size_t i = 0; i < tasks_.size(); ++i) {
        if (done[i] || indegree[i] != 0) continue;
        done[i] = true;
        order.push_back(i);
        for (const auto& e : edges_)
          if (e.second == i) --indegree[e.first];
        progressed = true;
        break;
      }
      if (!progressed) return std::nullopt;
    }
    return order;
  }

  [[nodiscard]] bool is_acyclic() const { return topological_order().has_value(); }

  /// All transitive prerequisites of a task.
  [[nodiscard]] std::vector<std::size_t> ancestors(std::size_t task) const {
    std::vector<bool> seen(tasks_.size(), false);
    std::vector<std::size_t> stack = prereqs_.at(task), out;
    while (!stack.empty()) {
      auto t = stack.back();
      stack.pop_back();
      if (seen[t]) continue;
      seen[t] = true;
      out.push_back(t);
      for (auto p : prereqs_[t]) stack.push_back(p);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Restriction to the named tasks (in the given order); edges between kept tasks survive.
  [[nodiscard]] TaskSpace subset(const std::vector<std::string>& names) const {
    std::vector<TaskInfo> kept;
    std::vector<std::size_t> map(tasks_.size(), tasks_.size());
    for (const auto& n : names) {
      auto i = index_of(n);
      map[i] = kept.size();
      kept.push_back(tasks_[i]);
    }
    std::vector<Edge> edges;
    for (const auto& [t, p] : edges_)
      if (map[t] < tasks_.size() && map[p] < tasks_.size()) edges.emplace_back(map[t], map[p]);
    return TaskSpace(std::move(kept), std::move(edges));
  }

  friend bool operator==(const TaskSpace& a, const TaskSpace& b) {
    if (a.tasks_.size() != b.tasks_.size() || a.edges_ != b.edges_) return false;
    for (std::size_t i = 0; i < a.tasks_.size(); ++i)
      if (a.tasks_[i].name != b.tasks_[i].name || a.tasks_[i].tier != b.tasks_[i].tier) return false;
    return true;
  }

 private:
  std::vector<TaskInfo> tasks_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> prereqs_;
};

}  // namespace hap::envs

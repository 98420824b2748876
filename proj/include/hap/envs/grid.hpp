#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "hap/envs/observation.hpp"

namespace hap::envs {

/// Rectangular grid of cell codes.
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, std::uint8_t fill = 0)
      : rows_(rows), cols_(cols), cells_(static_cast<std::size_t>(rows * cols), fill) {}

  [[nodiscard]] int rows() const { return rows_; }
  [[nodiscard]] int cols() const { return cols_; }
  [[nodiscard]] bool inside(GridPos p) const { return p.row >= 0 && p.row < rows_ && p.col >= 0 && p.col < cols_; }
  [[nodiscard]] std::uint8_t at(GridPos p) const { return cells_[index(p)]; }
  void set(GridPos p, std::uint8_t code) { cells_[index(p)] = code; }
  [[nodiscard]] const std::vector<std::uint8_t>& cells() const { return cells_; }

  /// Border of `code` around the whole grid.
  void frame(std::uint8_t code) {
    for (int r = 0; r < rows_; ++r) {
      set({r, 0}, code);
      set({r, cols_ - 1}, code);
    }
    for (int c = 0; c < cols_; ++c) {
      set({0, c}, code);
      set({rows_ - 1, c}, code);
    }
  }

  [[nodiscard]] std::vector<GridPos> cells_with(std::uint8_t code) const {
    std::vector<GridPos> out;
    for (int r = 0; r < rows_; ++r)
      for (int c = 0; c < cols_; ++c)
        if (at({r, c}) == code) out.push_back({r, c});
    return out;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  [[nodiscard]] std::size_t index(GridPos p) const { return static_cast<std::size_t>(p.row * cols_ + p.col); }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::uint8_t> cells_;
};

/// Breadth-first shortest path over cells accepted by `passable`, returning the
/// sequence of movement directions from `from` to the first cell satisfying
/// `is_target`. Neighbours are expanded in direction order, so paths are deterministic.
inline std::optional<std::vector<int>> bfs_route(const Grid& grid, GridPos from,
                                                 const std::function<bool(GridPos)>& passable,
                                                 const std::function<bool(GridPos)>& is_target) {
  const int n = grid.rows() * grid.cols();
  std::vector<int> parent(static_cast<std::size_t>(n), -2), via(static_cast<std::size_t>(n), -1);
  auto idx = [&](GridPos p) { return static_cast<std::size_t>(p.row * grid.cols() + p.col); };
  std::deque<GridPos> queue{from};
  parent[idx(from)] = -1;
  while (!queue.empty()) {
    GridPos p = queue.front();
    queue.pop_front();
    if (is_target(p)) {
      std::vector<int> route;
      for (std::size_t i = idx(p); parent[i] != -1; i = static_cast<std::size_t>(parent[i]))
        route.push_back(via[i]);
      return std::vector<int>(route.rbegin(), route.rend());
    }
    for (int d = 0; d < 4; ++d) {
      GridPos q = moved(p, d);
      if (!grid.inside(q) || parent[idx(q)] != -2 || !passable(q)) continue;
      parent[idx(q)] = static_cast<int>(idx(p));
      via[idx(q)] = d;
      queue.push_back(q);
    }
  }
  return std::nullopt;
}

/// BFS distance, or -1 when unreachable.
inline int bfs_distance(const Grid& grid, GridPos from, GridPos to, const std::function<bool(GridPos)>& passable) {
  auto route = bfs_route(grid, from, passable, [&](GridPos p) { return p == to; });
  return route ? static_cast<int>(route->size()) : -1;
}

}  // namespace hap::envs

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "hap/core/error.hpp"
#include "hap/tensor/mlp.hpp"

namespace hap::envs {

struct GridPos {
  int row = 0;
  int col = 0;
  friend bool operator==(GridPos, GridPos) = default;
};

inline int manhattan(GridPos a, GridPos b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col); }

/// Facing / movement directions; also the ids of the four movement actions.
enum Direction : int { kUp = 0, kRight = 1, kDown = 2, kLeft = 3 };

inline GridPos moved(GridPos p, int direction) {
  static constexpr int kDr[4] = {-1, 0, 1, 0};
  static constexpr int kDc[4] = {0, 1, 0, -1};
  return {p.row + kDr[direction], p.col + kDc[direction]};
}

/// Fully observed symbolic state of a grid environment.
struct Observation {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> grid;  ///< row-major cell codes
  GridPos agent;
  int facing = kUp;
  std::vector<int> inventory;  ///< item counts (empty for environments without items)
  std::size_t task = 0;
  std::size_t task_count = 1;

  [[nodiscard]] std::uint8_t at(GridPos p) const { return grid[static_cast<std::size_t>(p.row * cols + p.col)]; }

  [[nodiscard]] std::vector<double> task_onehot() const {
    std::vector<double> v(task_count, 0.0);
    v[task] = 1.0;
    return v;
  }

  friend bool operator==(const Observation&, const Observation&) = default;
};

/// Flattened observation encoding with a width fixed per environment:
///   one plane per non-empty cell code (rows x cols each; empty cells are all-zero),
///   an agent-position plane, a facing one-hot (4), the normalised (row, col),
///   inventory counts / 10, and finally the task one-hot.
/// In egocentric mode the planes are (2 rows - 1) x (2 cols - 1) windows centred
/// on the agent; cells outside the map read as walls and the agent plane is omitted.
struct ObservationEncoder {
  int rows = 0;
  int cols = 0;
  int code_count = 1;  ///< number of cell codes including empty (code 0)
  int wall_code = 1;
  std::size_t inventory_size = 0;
  std::size_t task_count = 1;
  bool egocentric = false;

  [[nodiscard]] int plane_rows() const { return egocentric ? 2 * rows - 1 : rows; }
  [[nodiscard]] int plane_cols() const { return egocentric ? 2 * cols - 1 : cols; }
  [[nodiscard]] std::size_t plane_size() const { return static_cast<std::size_t>(plane_rows() * plane_cols()); }
  [[nodiscard]] std::size_t plane_count() const {
    return static_cast<std::size_t>(code_count - 1) + (egocentric ? 0 : 1);
  }
  [[nodiscard]] std::size_t state_width() const { return plane_count() * plane_size() + 4 + 2 + inventory_size; }
  [[nodiscard]] std::size_t width() const { return state_width() + task_count; }

  /// Encoding without the task one-hot.
  [[nodiscard]] tensor::SparseVec encode_state(const Observation& obs) const {
    require(obs.rows == rows && obs.cols == cols, "encoder: grid shape mismatch");
    require(obs.inventory.size() == inventory_size, "encoder: inventory size mismatch");
    tensor::SparseVec out;
    const std::size_t ps = plane_size();
    if (egocentric) {
      const int pr = plane_rows(), pc = plane_cols();
      for (int r = 0; r < pr; ++r)
        for (int c = 0; c < pc; ++c) {
          const int gr = obs.agent.row + r - (rows - 1);
          const int gc = obs.agent.col + c - (cols - 1);
          int code = wall_code;
          if (gr >= 0 && gr < rows && gc >= 0 && gc < cols) code = obs.at({gr, gc});
          if (code > 0)
            out.push(static_cast<std::uint32_t>(static_cast<std::size_t>(code - 1) * ps +
                                                static_cast<std::size_t>(r * pc + c)),
                     1.0);
        }
    } else {
      for (int i = 0; i < rows * cols; ++i) {
        const int code = obs.grid[static_cast<std::size_t>(i)];
        if (code > 0)
          out.push(static_cast<std::uint32_t>(static_cast<std::size_t>(code - 1) * ps + static_cast<std::size_t>(i)),
                   1.0);
      }
      out.push(static_cast<std::uint32_t>(static_cast<std::size_t>(code_count - 1) * ps +
                                          static_cast<std::size_t>(obs.agent.row * cols + obs.agent.col)),
               1.0);
    }
    std::size_t base = plane_count() * ps;
    out.push(static_cast<std::uint32_t>(base + static_cast<std::size_t>(obs.facing)), 1.0);
    base += 4;
    out.push(static_cast<std::uint32_t>(base), rows > 1 ? obs.agent.row / static_cast<double>(rows - 1) : 0.0);
    out.push(static_cast<std::uint32_t>(base + 1), cols > 1 ? obs.agent.col / static_cast<double>(cols - 1) : 0.0);
    base += 2;
    for (std::size_t i = 0; i < inventory_size; ++i)
      out.push(static_cast<std::uint32_t>(base + i), obs.inventory[i] / 10.0);
    return out;
  }

  [[nodiscard]] tensor::SparseVec encode(const Observation& obs) const {
    require(obs.task < task_count && obs.task_count == task_count, "encoder: task index mismatch");
    auto out = encode_state(obs);
    out.push(static_cast<std::uint32_t>(state_width() + obs.task), 1.0);
    return out;
  }

  [[nodiscard]] std::vector<double> encode_dense(const Observation& obs) const { return encode(obs).dense(width()); }
};

struct Step {
  Observation obs;
  int action = 0;
  double reward = 0.0;
  double logp = 0.0;  ///< behaviour log-probability of `action`
};

/// One episode. `terminated` distinguishes a true terminal state (success,
/// hazard) from truncation by the step cap.
struct Trajectory {
  std::size_t task = 0;
  std::vector<Step> steps;
  Observation final_obs;
  bool success = false;
  bool terminated = false;
  double gamma = 0.99;
  double discounted_return = 0.0;

  [[nodiscard]] std::size_t length() const { return steps.size(); }

  [[nodiscard]] double recompute_return() const {
    double g = 0.0, discount = 1.0;
    for (const auto& s : steps) {
      g += discount * s.reward;
      discount *= gamma;
    }
    return g;
  }

  [[nodiscard]] double undiscounted_return() const {
    double g = 0.0;
    for (const auto& s : steps) g += s.reward;
    return g;
  }
};

}  // namespace hap::envs

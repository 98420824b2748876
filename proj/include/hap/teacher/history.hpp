#pragma once

#include <cstddef>
#include <deque>
#include <vector>

#include "hap/core/error.hpp"

namespace hap::teacher {

struct HistoryRecord {
  std::size_t task = 0;
  double ret = 0.0;
  bool success = false;
};

/// Ring buffer of the last W episodes plus lifetime selection counts.
/// Windowed aggregates are recomputed from the buffer on demand.
class HistoryWindow {
 public:
  HistoryWindow(std::size_t tasks, std::size_t capacity) : tasks_(tasks), capacity_(capacity), lifetime_(tasks, 0) {
    require(tasks > 0 && capacity > 0, "history: tasks and capacity must be positive");
  }

  void push(std::size_t task, double ret, bool success) {
    require(task < tasks_, "history: task index out of range");
    buffer_.push_back({task, ret, success});
    if (buffer_.size() > capacity_) buffer_.pop_front();
    ++lifetime_[task];
  }

  [[nodiscard]] std::size_t size() const { return buffer_.size(); }
  [[nodiscard]] std::size_t capacity() const { return capacity_; }
  [[nodiscard]] std::size_t task_count() const { return tasks_; }
  [[nodiscard]] const std::deque<HistoryRecord>& records() const { return buffer_; }
  [[nodiscard]] const std::vector<std::size_t>& lifetime_counts() const { return lifetime_; }

  [[nodiscard]] std::vector<std::size_t> window_counts() const {
    std::vector<std::size_t> c(tasks_, 0);
    for (const auto& r : buffer_) ++c[r.task];
    return c;
  }

  /// Per-task success rate over the window (0 for tasks absent from it).
  [[nodiscard]] std::vector<double> success_rates() const {
    std::vector<double> s(tasks_, 0.0);
    auto c = window_counts();
    for (const auto& r : buffer_) s[r.task] += r.success ? 1.0 : 0.0;
    for (std::size_t t = 0; t < tasks_; ++t)
      if (c[t] > 0) s[t] /= static_cast<double>(c[t]);
    return s;
  }

  /// Per-task mean return over the window (0 for tasks absent from it).
  [[nodiscard]] std::vector<double> mean_returns() const {
    std::vector<double> m(tasks_, 0.0);
    auto c = window_counts();
    for (const auto& r : buffer_) m[r.task] += r.ret;
    for (std::size_t t = 0; t < tasks_; ++t)
      if (c[t] > 0) m[t] /= static_cast<double>(c[t]);
    return m;
  }

  /// Feature vector of length 3n: success rates, window counts / W, mean returns.
  /// Masked components are zero-filled so the length never changes.
  [[nodiscard]] std::vector<double> features(bool success = true, bool counts = true, bool returns = true) const {
    std::vector<double> f(3 * tasks_, 0.0);
    if (success) {
      auto s = success_rates();
      std::copy(s.begin(), s.end(), f.begin());
    }
    if (counts) {
      auto c = window_counts();
      for (std::size_t t = 0; t < tasks_; ++t)
        f[tasks_ + t] = static_cast<double>(c[t]) / static_cast<double>(capacity_);
    }
    if (returns) {
      auto m = mean_returns();
      std::copy(m.begin(), m.end(), f.begin() + static_cast<std::ptrdiff_t>(2 * tasks_));
    }
    return f;
  }

 private:
  std::size_t tasks_;
  std::size_t capacity_;
  std::deque<HistoryRecord> buffer_;
  std::vector<std::size_t> lifetime_;
};

}  // namespace hap::teacher

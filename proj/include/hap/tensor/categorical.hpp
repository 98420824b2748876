#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hap/core/error.hpp"
#include "hap/core/rng.hpp"

namespace hap::tensor {

/// Discrete distribution over indices 0..n-1.
class Categorical {
 public:
  static constexpr double kSumTolerance = 1e-9;

  Categorical() = default;

  explicit Categorical(std::vector<double> probs) : probs_(std::move(probs)) {
    require(!probs_.empty(), "categorical: empty distribution");
    double total = 0.0;
    for (double p : probs_) {
      require(std::isfinite(p) && p >= 0.0, "categorical: negative or non-finite probability");
      total += p;
    }
    require(std::abs(total - 1.0) <= kSumTolerance,
            "categorical: probabilities sum to " + std::to_string(total));
  }

  static Categorical uniform(std::size_t n) {
    require(n > 0, "categorical: uniform over zero outcomes");
    return Categorical(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  static Categorical one_hot(std::size_t n, std::size_t k) {
    require(k < n, "categorical: one-hot index out of range");
    std::vector<double> p(n, 0.0);
    p[k] = 1.0;
    return Categorical(std::move(p));
  }

  [[nodiscard]] std::size_t size() const { return probs_.size(); }
  [[nodiscard]] double operator[](std::size_t i) const { return probs_[i]; }
  [[nodiscard]] const std::vector<double>& probs() const { return probs_; }

  [[nodiscard]] std::size_t argmax() const {
    return static_cast<std::size_t>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
  }

  [[nodiscard]] double min() const { return *std::min_element(probs_.begin(), probs_.end()); }

  friend bool operator==(const Categorical&, const Categorical&) = default;

 private:
  std::vector<double> probs_;
};

inline std::vector<double> log_softmax(std::span<const double> logits) {
  require(!logits.empty(), "log_softmax: empty logits");
  const double hi = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double z : logits) total += std::exp(z - hi);
  const double lse = hi + std::log(total);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

/// Log-sum-exp stabilised softmax; invariant under adding a constant to every logit.
inline Categorical softmax(std::span<const double> logits) {
  require(!logits.empty(), "softmax: empty logits");
  for (double z : logits) require(std::isfinite(z), "softmax: non-finite logit");
  const double hi = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - hi);
    total += p[i];
  }
  for (double& x : p) x /= total;
  // Renormalise once more so the sum is exact to the last ulp or two.
  const double again = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& x : p) x /= again;
  return Categorical(std::move(p));
}

/// Shannon entropy in nats with 0 ln 0 = 0.
inline double entropy(const Categorical& dist) {
  double h = 0.0;
  for (double p : dist.probs())
    if (p > 0.0) h -= p * std::log(p);
  return std::max(h, 0.0);
}

/// Inverse-CDF draw. Zero-probability outcomes are never returned.
inline std::size_t sample(const Categorical& dist, RngStream& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] <= 0.0) continue;
    last_positive = i;
    cumulative += dist[i];
    if (u < cumulative) return i;
  }
  return last_positive;
}

}  // namespace hap::tensor

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string_view>

namespace hap {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// A named, splittable random stream.
///
/// Every consumer (environment seeds, student sampling, teacher sampling,
/// evaluation) receives its own stream derived from a root seed by name, so
/// adding or reordering draws in one consumer never shifts another one's
/// sequence. Draws avoid std:: distributions so sequences only depend on the
/// 64-bit engine output.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : seed_(seed), engine_(detail::splitmix64(seed)) {}

  [[nodiscard]] std::uint64_t seed() const { return seed_; }

  /// Child stream keyed by name; independent of how much this stream has been used.
  [[nodiscard]] RngStream split(std::string_view name) const {
    return RngStream(detail::splitmix64(seed_ ^ detail::splitmix64(detail::fnv1a(name))));
  }

  [[nodiscard]] RngStream split(std::uint64_t index) const {
    return RngStream(detail::splitmix64(seed_ + 0x632be59bd9b4e019ULL * (index + 1)));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename Container>
  void shuffle(Container& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// Seeds handed to environments carry a tag in the top bit so training and
/// evaluation seeds can never collide.
enum class SeedTag : std::uint64_t { kTrain = 0, kEval = 1 };

inline std::uint64_t tagged_seed(std::uint64_t raw, SeedTag tag) {
  constexpr std::uint64_t kTopBit = 1ULL << 63;
  return (raw & ~kTopBit) | (tag == SeedTag::kEval ? kTopBit : 0);
}

inline SeedTag seed_tag(std::uint64_t seed) {
  return (seed >> 63) != 0 ? SeedTag::kEval : SeedTag::kTrain;
}

}  // namespace hap

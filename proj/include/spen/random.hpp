#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>

#include "spen/core.hpp"

namespace spen {

namespace detail {

// SplitMix64 finalizer: a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Counter-based uniform bit generator. Output i is mix64(key + i * golden);
// there is no hidden state besides the counter, so two engines with the
// same key produce the same sequence regardless of when they are created.
class CounterEngine {
 public:
  using result_type = std::uint64_t;

  explicit CounterEngine(std::uint64_t key) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    ++counter_;
    return detail::mix64(key_ ^ detail::mix64(counter_ * 0xD1B54A32D192ED03ULL));
  }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Hierarchical indices identifying a draw: (replication, outer iteration,
// inner iteration, batch index). Unused levels stay at kUnset.
struct SeedPath {
  static constexpr std::uint64_t kUnset = std::numeric_limits<std::uint64_t>::max();
  std::array<std::uint64_t, 4> index{kUnset, kUnset, kUnset, kUnset};

  friend bool operator==(const SeedPath&, const SeedPath&) = default;
};

// A keyed random stream. Children are derived by hashing (key, index), so a
// stream tree can be traversed in any order and by any thread with the same
// results. Streams are cheap values; copying one never advances anything.
class RandomStream {
 public:
  RandomStream() = default;
  explicit RandomStream(std::uint64_t seed) noexcept
      : seed_(seed), key_(detail::mix64(seed ^ 0x5EED5EED5EED5EEDULL)) {}

  RandomStream child(std::uint64_t i) const noexcept {
    RandomStream s = *this;
    s.key_ = detail::mix64(key_ ^ detail::mix64(i + 0x632BE59BD9B4E019ULL * (depth_ + 1)));
    if (depth_ < s.path_.index.size()) s.path_.index[depth_] = i;
    ++s.depth_;
    return s;
  }

  CounterEngine engine() const noexcept { return CounterEngine(key_); }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t key() const noexcept { return key_; }
  const SeedPath& path() const noexcept { return path_; }
  std::size_t depth() const noexcept { return depth_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t key_ = detail::mix64(0x5EED5EED5EED5EEDULL);
  SeedPath path_{};
  std::size_t depth_ = 0;
};

// Fills `out` with independent standard normal draws from `engine`.
template <class Derived>
void fill_standard_normal(CounterEngine& engine, Eigen::DenseBase<Derived>& out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = normal(engine);
}

}  // namespace spen

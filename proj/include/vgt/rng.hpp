// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace vgt {

/// Seeded generator with hand-rolled conversions so draws do not depend on
/// the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

  std::string state() const;
  void set_state(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a(const std::string& text);

/// Named sub-streams derived from one run seed, so adding draws to one
/// source of randomness never shifts another.
class RngStreams {
 public:
  explicit RngStreams(std::uint64_t seed = 0) : seed_(seed) {}

  Rng& stream(const std::string& name);
  std::uint64_t seed() const { return seed_; }

  /// name -> engine state, for checkpoints.
  std::map<std::string, std::string> snapshot() const;
  void restore(const std::map<std::string, std::string>& states);

 private:
  std::uint64_t seed_;
  std::map<std::string, Rng> streams_;
};

}  // namespace vgt

// SPDX-License-Identifier: Apache-2.0
#include "vgt/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "vgt/error.hpp"

namespace vgt {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) {
  check(n > 0, "Rng::below: empty range");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::set_state(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  check(!is.fail(), "Rng::set_state: malformed state");
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng& RngStreams::stream(const std::string& name) {
  auto it = streams_.find(name);
  if (it == streams_.end()) {
    it = streams_.emplace(name, Rng(splitmix64(seed_ ^ fnv1a(name)))).first;
  }
  return it->second;
}

std::map<std::string, std::string> RngStreams::snapshot() const {
  std::map<std::string, std::string> out;
  for (const auto& [name, rng] : streams_) out[name] = rng.state();
  return out;
}

void RngStreams::restore(const std::map<std::string, std::string>& states) {
  for (const auto& [name, state] : states) stream(name).set_state(state);
}

}  // namespace vgt

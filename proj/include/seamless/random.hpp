#pragma once

// Counter-derived random streams. Stream i of master seed s depends only on
// (s, i), so any replicate can be re-run in isolation. Variates are built
// from raw 64-bit draws, not <random> distributions, so results do not depend
// on the standard library implementation.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>

#include "seamless/error.hpp"

namespace seamless {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class RandomStream {
 public:
  RandomStream(std::uint64_t master_seed, std::uint64_t stream_id)
      : engine_(splitmix64(splitmix64(master_seed) ^ splitmix64(~stream_id))) {}

  /// Uniform on the open interval (0, 1).
  double uniform() { return (double(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal(double mean = 0.0, double sd = 1.0) {
    // Box-Muller; the sine branch is discarded to keep the stream stateless.
    const double u1 = uniform(), u2 = uniform();
    return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Index drawn with the given probabilities (which must sum to ~1).
  std::size_t categorical(std::span<const double> probs) {
    require(!probs.empty(), ErrorCode::InvalidParams, "empty categorical distribution");
    const double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    return probs.size() - 1;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace seamless

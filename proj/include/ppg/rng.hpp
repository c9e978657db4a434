#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>

#include "ppg/types.hpp"

namespace ppg {

// splitmix64 finalizer; used to turn (seed, index...) tuples into stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(seed);
  for (std::uint64_t p : path) s = mix64(s ^ mix64(p));
  return s;
}

// Seeded random stream. Uniform doubles are built from the raw 64-bit output so
// sequences do not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    return Rng(derive_seed(seed, path));
  }

  // Uniform in [0, 1).
  Scalar uniform() { return static_cast<Scalar>(engine_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller.
  Scalar normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    Scalar u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const Scalar u2 = uniform();
    const Scalar radius = std::sqrt(-2.0 * std::log(u1));
    const Scalar angle = 2.0 * std::numbers::pi_v<Scalar> * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  // Index drawn from an unnormalized-free probability vector by inverse CDF.
  // The final bucket absorbs any rounding slack.
  int categorical(std::span<const Scalar> probs) {
    const Scalar u = uniform();
    Scalar cum = 0.0;
    for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
      cum += probs[k];
      if (u < cum) return static_cast<int>(k);
    }
    return static_cast<int>(probs.size()) - 1;
  }

  // Uniform integer in [0, bound) by rejection-free scaling (bound << 2^53).
  std::uint64_t uniform_below(std::uint64_t bound) {
    return static_cast<std::uint64_t>(uniform() * static_cast<Scalar>(bound));
  }

 private:
  std::mt19937_64 engine_;
  Scalar spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace ppg

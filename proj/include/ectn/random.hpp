#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace ectn {

// std::mt19937_64 output is fully specified by the standard; the standard
// distributions are not, so the few draws we need are written out here to
// keep seeded runs identical across toolchains.
using Rng = std::mt19937_64;

/// Uniform draw in (0, 1].
inline double uniform_positive(Rng& rng) {
  return static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
}

/// Uniform draw in [0, 1).
inline double uniform_unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, bound), bound > 0. Rejection keeps it unbiased.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit = bound * (UINT64_MAX / bound);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

/// Standard normal via Box-Muller (one value per call).
inline double standard_normal(Rng& rng) {
  const double u1 = uniform_positive(rng);
  const double u2 = uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace ectn

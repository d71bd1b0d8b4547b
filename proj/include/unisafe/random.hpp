#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "unisafe/params.hpp"

namespace unisafe {

// Sampling helpers built directly on the engine's bits, so draws are
// reproducible across standard library implementations.

using Rng = std::mt19937_64;

/// splitmix64 mix of (seed, index); used to derive independent per-task streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Uniform on [0, 1).
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Box-Muller.
inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Uniform in the closed unit ball of R^dim.
inline Vec uniform_in_ball(Rng& rng, int dim) {
  Vec g(dim);
  double norm = 0.0;
  while (norm == 0.0) {
    for (int i = 0; i < dim; ++i) g(i) = standard_normal(rng);
    norm = g.norm();
  }
  const double radius = std::pow(uniform01(rng), 1.0 / dim);
  return g * (radius / norm);
}

}  // namespace unisafe

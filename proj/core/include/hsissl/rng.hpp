#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace hsissl {

using Rng = std::mt19937_64;

/// Stable 64-bit seed for a named component of a run. Identical on every
/// platform, unlike std::hash.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view component);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view component,
                          std::uint64_t index);

/// Uniform integer in [0, n). Portable replacement for
/// std::uniform_int_distribution whose output is implementation-defined.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

/// Uniform double in [0, 1) with 53 random bits.
double uniform_unit(Rng& rng);

double uniform_real(Rng& rng, double lo, double hi);

/// Standard normal via Box-Muller on uniform_unit.
double standard_normal(Rng& rng);

}  // namespace hsissl

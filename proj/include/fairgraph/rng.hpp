#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fairgraph {

using Rng = std::mt19937_64;

/// Seed for an independent stream, derived from the run seed by hashing a
/// component label (FNV-1a) and an index through splitmix64. Adding a new
/// component never shifts the streams of existing ones.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index = 0);

/// Uniform double in [0, 1) from the top 53 bits; identical across
/// standard libraries, unlike std::uniform_real_distribution.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, bound) by rejection, portable across libraries.
std::uint64_t uniform_below(Rng& rng, std::uint64_t bound);

/// Standard normal via Box-Muller on uniform01.
double standard_normal(Rng& rng);

}  // namespace fairgraph

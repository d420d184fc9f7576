// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

namespace edgeshard {

using Rng = std::mt19937_64;

/// Uniform in [0, 1). Built from raw engine bits so results do not depend on
/// the standard library's distribution implementations.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform_range(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Deterministic substream seed, for sharding Monte-Carlo work.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace edgeshard

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "inn/matrix.hpp"

namespace inn {

/// Seeded generator with portable uniform and Gaussian draws.
///
/// Draws are computed from raw 64-bit engine output rather than through the
/// standard distributions, whose algorithms vary between library vendors.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller. Draws come in pairs; the second is cached.
  double normal();

  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);

  Matrix normal_matrix(Index rows, Index cols);

  /// Fisher-Yates shuffle of 0..n-1.
  std::vector<int> permutation(int n);

  /// Derives an independent stream seed (SplitMix64 finalizer).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace inn

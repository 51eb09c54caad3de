// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>

#include "inn/problems.hpp"

namespace inn {

/// Rejection-sampling output.
struct AbcResult {
  Matrix samples;              // accepted x rows
  std::size_t simulations = 0;
  bool budget_exhausted = false;

  double acceptance_rate() const {
    return simulations == 0 ? 0.0
                            : static_cast<double>(samples.rows()) / static_cast<double>(simulations);
  }
};

/// Draws from the prior until `n` draws satisfy |s(x) - y*| < epsilon or
/// `max_sims` simulations have run. On exhaustion the partial set is returned
/// with budget_exhausted set.
AbcResult abc_threshold(const Problem& problem, const Vector& y_star, double epsilon,
                        std::size_t n, std::size_t max_sims, std::uint64_t seed);

/// Number of simulations run by abc_quantile: ceil(n / q).
std::size_t abc_quantile_simulations(std::size_t n, double q);

/// Runs exactly ceil(n / q) simulations and keeps the n closest to y*,
/// ordered by distance.
AbcResult abc_quantile(const Problem& problem, const Vector& y_star, double q, std::size_t n,
                       std::uint64_t seed);

}  // namespace inn

// SPDX-License-Identifier: Apache-2.0
#include "inn/abc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace inn {

namespace {

constexpr Index kChunk = 4096;

double distance(std::span<const double> a, const Vector& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b(static_cast<Index>(i));
    acc += d * d;
  }
  return std::sqrt(acc);
}

void check_problem(const Problem& problem, const Vector& y_star) {
  if (!problem.has_simulator()) {
    throw std::invalid_argument("ABC needs a problem with a simulator");
  }
  if (y_star.size() != problem.dims().y) throw ShapeError("ABC: y* width mismatch");
}

}  // namespace

AbcResult abc_threshold(const Problem& problem, const Vector& y_star, double epsilon,
                        std::size_t n, std::size_t max_sims, std::uint64_t seed) {
  check_problem(problem, y_star);
  if (!(epsilon > 0.0)) throw std::invalid_argument("ABC threshold must be positive");
  if (n < 1) throw std::invalid_argument("ABC needs at least one sample");
  const FlowDims d = problem.dims();
  Rng rng(seed);
  std::vector<double> accepted;
  accepted.reserve(n * static_cast<std::size_t>(d.x));
  std::size_t count = 0;
  std::size_t sims = 0;
  Vector y(d.y);
  const std::span<double> y_span(y.data(), static_cast<std::size_t>(d.y));
  while (count < n && sims < max_sims) {
    const Matrix x = problem.sample_prior(kChunk, rng);
    for (Index i = 0; i < x.rows() && count < n && sims < max_sims; ++i) {
      const std::span<const double> row(x.data() + i * d.x, static_cast<std::size_t>(d.x));
      problem.simulate(row, y_span);
      ++sims;
      if (distance(y_span, y_star) < epsilon) {
        accepted.insert(accepted.end(), row.begin(), row.end());
        ++count;
      }
    }
  }
  AbcResult result;
  result.samples = Matrix(static_cast<Index>(count), d.x);
  std::copy(accepted.begin(), accepted.end(), result.samples.data());
  result.simulations = sims;
  result.budget_exhausted = count < n;
  return result;
}

std::size_t abc_quantile_simulations(std::size_t n, double q) {
  if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("ABC quantile must lie in (0, 1]");
  // Guard against n / q landing one ulp above an integer.
  const double raw = static_cast<double>(n) / q;
  return static_cast<std::size_t>(std::ceil(raw * (1.0 - 1e-12)));
}

AbcResult abc_quantile(const Problem& problem, const Vector& y_star, double q, std::size_t n,
                       std::uint64_t seed) {
  check_problem(problem, y_star);
  const std::size_t sims = abc_quantile_simulations(n, q);
  const FlowDims d = problem.dims();
  Rng rng(seed);
  const Matrix x = problem.sample_prior(static_cast<Index>(sims), rng);
  std::vector<double> dist(sims);
  Vector y(d.y);
  const std::span<double> y_span(y.data(), static_cast<std::size_t>(d.y));
  for (std::size_t i = 0; i < sims; ++i) {
    const std::span<const double> row(x.data() + static_cast<Index>(i) * d.x,
                                      static_cast<std::size_t>(d.x));
    problem.simulate(row, y_span);
    dist[i] = distance(y_span, y_star);
  }
  std::vector<std::size_t> order(sims);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t keep = std::min(n, sims);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
                    });
  AbcResult result;
  result.samples = Matrix(static_cast<Index>(keep), d.x);
  for (std::size_t k = 0; k < keep; ++k) result.samples.row(static_cast<Index>(k)) = x.row(static_cast<Index>(order[k]));
  result.simulations = sims;
  return result;
}

}  // namespace inn

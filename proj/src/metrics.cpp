// SPDX-License-Identifier: Apache-2.0
#include "inn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace inn {

std::string_view source_name(SampleSource source) {
  switch (source) {
    case SampleSource::kInn:
      return "inn";
    case SampleSource::kAbc:
      return "abc";
    case SampleSource::kAnalytic:
      return "analytic";
  }
  return "unknown";
}

PosteriorSamples sample_posterior(const InnModel& model, const Vector& y_star, Index n,
                                  std::uint64_t seed) {
  const FlowDims& d = model.dims();
  if (y_star.size() != d.y) {
    throw ShapeError("y* has width " + std::to_string(y_star.size()) + ", model expects " +
                     std::to_string(d.y));
  }
  Rng rng(seed);
  Matrix y = y_star.transpose().replicate(n, 1);
  Matrix z = rng.normal_matrix(n, d.z);
  Matrix pad = Matrix::Zero(n, model.output_pad_width());
  Matrix x = model.inverse(y, z, pad).leftCols(d.x);
  return {y_star, std::move(x), SampleSource::kInn};
}

double mean_shift_bandwidth(const Matrix& samples) {
  const auto n = static_cast<double>(samples.rows());
  const auto d = static_cast<double>(samples.cols());
  // Silverman's multivariate rule of thumb; 1.06 sigma n^(-1/5) when d = 1.
  const double factor = std::pow(4.0 / ((d + 2.0) * n), 1.0 / (d + 4.0));
  double total = 0.0;
  for (Index c = 0; c < samples.cols(); ++c) {
    const double mu = samples.col(c).mean();
    const double var = (samples.col(c).array() - mu).square().sum() / std::max(1.0, n - 1.0);
    total += factor * std::sqrt(var);
  }
  return total / d;
}

Vector map_estimate(const Matrix& samples, const MeanShiftOptions& options) {
  if (samples.rows() < 1) throw std::invalid_argument("map_estimate needs samples");
  const Index n = samples.rows();
  const Index dim = samples.cols();
  if ((samples.rowwise() - samples.row(0)).cwiseAbs().maxCoeff() == 0.0) {
    return samples.row(0).transpose();
  }
  const double h = mean_shift_bandwidth(samples);
  if (!(h > 0.0)) return samples.row(0).transpose();

  const double inv_2h2 = 1.0 / (2.0 * h * h);
  Vector weights(n);
  auto kernel_weights = [&](const Vector& at) {
    for (Index i = 0; i < n; ++i) {
      double d2 = 0.0;
      for (Index c = 0; c < dim; ++c) {
        const double diff = samples(i, c) - at(c);
        d2 += diff * diff;
      }
      weights(i) = std::exp(-d2 * inv_2h2);
    }
    return weights.sum();
  };

  Vector best = samples.row(0).transpose();
  double best_density = -1.0;
  const Index stride = std::max<Index>(1, options.start_stride);
  for (Index s = 0; s < n; s += stride) {
    Vector x = samples.row(s).transpose();
    for (int it = 0; it < options.max_iterations; ++it) {
      const double total = kernel_weights(x);
      if (!(total > 0.0)) break;
      const Vector next = (samples.transpose() * weights) / total;
      const double shift = (next - x).norm();
      x = next;
      if (shift < options.tolerance) break;
    }
    const double density = kernel_weights(x);
    if (density > best_density) {
      best_density = density;
      best = x;
    }
  }
  return best;
}

std::vector<MarginalMode> marginal_modes(const std::vector<double>& values,
                                         double min_relative_height, int grid_points) {
  if (values.size() < 2) throw std::invalid_argument("marginal_modes needs at least two values");
  if (grid_points < 3) throw std::invalid_argument("marginal_modes needs at least three grid points");
  Matrix column(static_cast<Index>(values.size()), 1);
  for (std::size_t i = 0; i < values.size(); ++i) column(static_cast<Index>(i), 0) = values[i];
  const double h = mean_shift_bandwidth(column);
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  if (!(h > 0.0)) return {{*lo_it, 1.0}};

  const double lo = *lo_it - 3.0 * h;
  const double step = (*hi_it + 3.0 * h - lo) / (grid_points - 1);
  std::vector<double> density(static_cast<std::size_t>(grid_points), 0.0);
  for (int g = 0; g < grid_points; ++g) {
    const double at = lo + step * g;
    double acc = 0.0;
    for (double v : values) {
      const double u = (v - at) / h;
      acc += std::exp(-0.5 * u * u);
    }
    density[static_cast<std::size_t>(g)] = acc;
  }
  std::vector<MarginalMode> modes;
  double top = 0.0;
  for (int g = 1; g + 1 < grid_points; ++g) {
    const auto k = static_cast<std::size_t>(g);
    if (density[k] > density[k - 1] && density[k] >= density[k + 1]) {
      modes.push_back({lo + step * g, density[k]});
      top = std::max(top, density[k]);
    }
  }
  std::vector<MarginalMode> kept;
  for (const MarginalMode& m : modes) {
    if (m.relative_height >= min_relative_height * top) kept.push_back({m.location, m.relative_height / top});
  }
  return kept;
}

double resim_error(const Problem& problem, const Vector& x_hat, const Vector& y_star) {
  const Vector y = problem.simulate(
      std::span<const double>(x_hat.data(), static_cast<std::size_t>(x_hat.size())));
  return (y - y_star).norm();
}

RmseReport rmse(const std::vector<Vector>& estimates, const std::vector<Vector>& truths) {
  if (estimates.size() != truths.size() || estimates.empty()) {
    throw std::invalid_argument("rmse needs aligned, non-empty lists");
  }
  const Index dim = truths.front().size();
  RmseReport report{0.0, Vector::Zero(dim)};
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (estimates[i].size() != dim || truths[i].size() != dim) {
      throw ShapeError("rmse: inconsistent vector widths");
    }
    const Vector diff = estimates[i] - truths[i];
    report.total += diff.squaredNorm();
    report.per_dim += diff.cwiseProduct(diff);
  }
  const auto n = static_cast<double>(truths.size());
  report.total = std::sqrt(report.total / n);
  report.per_dim = (report.per_dim / n).cwiseSqrt();
  return report;
}

std::vector<TestCase> make_test_set(const Problem& problem, Index n, std::uint64_t seed) {
  Rng rng(seed);
  auto [x, y] = problem.sample_joint(n, rng);
  std::vector<TestCase> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) out.push_back({x.row(i).transpose(), y.row(i).transpose()});
  return out;
}

RmseReport rmse_map(const InnModel& model, const std::vector<TestCase>& tests,
                    Index samples_per_posterior, std::uint64_t seed) {
  std::vector<Vector> estimates;
  std::vector<Vector> truths;
  for (std::size_t i = 0; i < tests.size(); ++i) {
    const PosteriorSamples post =
        sample_posterior(model, tests[i].y_star, samples_per_posterior, Rng::derive(seed, i));
    estimates.push_back(map_estimate(post.samples));
    truths.push_back(tests[i].x_star);
  }
  return rmse(estimates, truths);
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 99; ++i) grid.push_back(static_cast<double>(i) / 100.0);
  return grid;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty data");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace {

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

CalibrationCurve calibration_error(const std::vector<PosteriorSamples>& posteriors,
                                   const std::vector<Vector>& truths,
                                   const std::vector<double>& alpha_grid) {
  if (posteriors.size() != truths.size() || posteriors.empty()) {
    throw std::invalid_argument("calibration needs aligned, non-empty lists");
  }
  if (alpha_grid.empty()) throw std::invalid_argument("calibration needs an alpha grid");
  for (std::size_t k = 0; k < alpha_grid.size(); ++k) {
    if (!(alpha_grid[k] > 0.0 && alpha_grid[k] < 1.0) ||
        (k > 0 && !(alpha_grid[k] > alpha_grid[k - 1]))) {
      throw std::invalid_argument("alpha grid must be strictly increasing inside (0, 1)");
    }
  }
  std::vector<double> inliers(alpha_grid.size(), 0.0);
  std::size_t pairs = 0;
  std::vector<double> column;
  for (std::size_t p = 0; p < posteriors.size(); ++p) {
    const Matrix& s = posteriors[p].samples;
    if (s.rows() < 100) throw std::invalid_argument("calibration needs >= 100 samples per posterior");
    if (truths[p].size() != s.cols()) throw ShapeError("calibration: truth width mismatch");
    for (Index d = 0; d < s.cols(); ++d) {
      column.resize(static_cast<std::size_t>(s.rows()));
      for (Index i = 0; i < s.rows(); ++i) column[static_cast<std::size_t>(i)] = s(i, d);
      std::sort(column.begin(), column.end());
      const double truth = truths[p](d);
      for (std::size_t k = 0; k < alpha_grid.size(); ++k) {
        const double a = alpha_grid[k];
        const double lo = quantile_sorted(column, 0.5 * (1.0 - a));
        const double hi = quantile_sorted(column, 0.5 * (1.0 + a));
        if (lo <= truth && truth <= hi) inliers[k] += 1.0;
      }
      ++pairs;
    }
  }
  CalibrationCurve curve;
  curve.alpha = alpha_grid;
  std::vector<double> errors;
  for (std::size_t k = 0; k < alpha_grid.size(); ++k) {
    const double frac = inliers[k] / static_cast<double>(pairs);
    curve.alpha_inliers.push_back(frac);
    errors.push_back(std::abs(frac - alpha_grid[k]));
  }
  curve.median_error = median(std::move(errors));
  return curve;
}

double chi2_2d_radius(double mass) {
  if (!(mass > 0.0 && mass < 1.0)) throw std::invalid_argument("mass must lie in (0, 1)");
  return std::sqrt(-2.0 * std::log1p(-mass));
}

LatentGrid latent_grid(const InnModel& model, const Vector& y_star, int points_per_axis,
                       double extent, const std::vector<Vector>& mode_centers,
                       const Problem* problem) {
  const FlowDims& d = model.dims();
  if (d.z != 2) throw std::invalid_argument("latent grid analysis needs K = 2");
  if (y_star.size() != d.y) throw ShapeError("latent grid: y* width mismatch");
  if (points_per_axis < 1) throw std::invalid_argument("latent grid needs at least one point");
  for (const Vector& c : mode_centers) {
    if (c.size() != d.x) throw ShapeError("latent grid: mode centre width mismatch");
  }

  const Index n = static_cast<Index>(points_per_axis) * points_per_axis;
  Matrix z(n, 2);
  const double step = points_per_axis > 1 ? 2.0 * extent / (points_per_axis - 1) : 0.0;
  for (int i = 0; i < points_per_axis; ++i) {
    for (int j = 0; j < points_per_axis; ++j) {
      const Index r = static_cast<Index>(i) * points_per_axis + j;
      z(r, 0) = points_per_axis > 1 ? -extent + step * i : 0.0;
      z(r, 1) = points_per_axis > 1 ? -extent + step * j : 0.0;
    }
  }
  const Matrix y = y_star.transpose().replicate(n, 1);
  const Matrix x =
      model.inverse(y, z, Matrix::Zero(n, model.output_pad_width())).leftCols(d.x);

  LatentGrid grid;
  grid.radius50 = chi2_2d_radius(0.5);
  grid.radius90 = chi2_2d_radius(0.9);
  grid.rows.reserve(static_cast<std::size_t>(n));
  for (Index r = 0; r < n; ++r) {
    LatentGridRow row{z(r, 0), z(r, 1), -1, 0.0};
    const Vector xr = x.row(r).transpose();
    if (!mode_centers.empty()) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t m = 0; m < mode_centers.size(); ++m) {
        const double dist = (xr - mode_centers[m]).norm();
        if (dist < best) {
          best = dist;
          row.mode_id = static_cast<int>(m);
        }
      }
      row.distance = best;
    } else if (problem != nullptr && problem->has_simulator()) {
      row.distance = resim_error(*problem, xr, y_star);
    }
    grid.rows.push_back(row);
  }
  return grid;
}

ModeOccupancy mode_occupancy(const GmmSpec& spec, const Matrix& samples, int label) {
  if (samples.cols() != 2) throw ShapeError("mode occupancy needs 2-D samples");
  if (samples.rows() < 1) throw std::invalid_argument("mode occupancy needs samples");
  const std::vector<int> own = spec.modes_of(label);
  const int modes = static_cast<int>(spec.labels.size());
  std::vector<Vector> centers;
  for (int m = 0; m < modes; ++m) centers.push_back(spec.center(m));
  const double reach = 3.0 * spec.sigma;

  ModeOccupancy occ;
  occ.label = label;
  occ.nearest_fraction.assign(static_cast<std::size_t>(modes), 0.0);
  double correct = 0.0;
  double wrong = 0.0;
  for (Index r = 0; r < samples.rows(); ++r) {
    const Vector x = samples.row(r).transpose();
    int nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    bool near_own = false;
    bool near_other = false;
    for (int m = 0; m < modes; ++m) {
      const double dist = (x - centers[static_cast<std::size_t>(m)]).norm();
      if (dist < best) {
        best = dist;
        nearest = m;
      }
      if (dist <= reach) {
        (spec.labels[static_cast<std::size_t>(m)] == label ? near_own : near_other) = true;
      }
    }
    occ.nearest_fraction[static_cast<std::size_t>(nearest)] += 1.0;
    correct += near_own ? 1.0 : 0.0;
    wrong += near_other ? 1.0 : 0.0;
  }
  const auto n = static_cast<double>(samples.rows());
  double own_total = 0.0;
  for (int m : own) own_total += occ.nearest_fraction[static_cast<std::size_t>(m)];
  for (int m : own) {
    const double count = occ.nearest_fraction[static_cast<std::size_t>(m)];
    occ.label_mode_share.push_back(own_total > 0.0 ? count / own_total : 0.0);
  }
  for (double& f : occ.nearest_fraction) f /= n;
  occ.correct_within = correct / n;
  occ.wrong_within = wrong / n;
  return occ;
}

}  // namespace inn

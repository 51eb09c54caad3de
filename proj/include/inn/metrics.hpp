// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "inn/flow.hpp"
#include "inn/problems.hpp"

namespace inn {

enum class SampleSource { kInn, kAbc, kAnalytic };

std::string_view source_name(SampleSource source);

struct PosteriorSamples {
  Vector y_star;
  Matrix samples;  // n x D
  SampleSource source = SampleSource::kInn;
};

/// x = g(y*, z, 0) with z ~ N(0, I_K), stripped to the first D columns.
PosteriorSamples sample_posterior(const InnModel& model, const Vector& y_star, Index n,
                                  std::uint64_t seed);

struct MeanShiftOptions {
  Index start_stride = 8;
  double tolerance = 1e-5;
  int max_iterations = 500;
};

/// Gaussian-kernel mean shift started from every `start_stride`-th sample.
/// Returns the converged point with the highest kernel density. The isotropic
/// bandwidth is the per-dimension Silverman bandwidth averaged over
/// dimensions. Identical samples return that point.
Vector map_estimate(const Matrix& samples, const MeanShiftOptions& options = {});

/// Silverman bandwidth used by map_estimate.
double mean_shift_bandwidth(const Matrix& samples);

struct MarginalMode {
  double location = 0.0;
  double relative_height = 0.0;  // density relative to the highest mode
};

/// Local maxima of a Gaussian kernel density estimate of one-dimensional
/// data, evaluated on `grid_points` points spanning the data plus three
/// bandwidths. Modes lower than `min_relative_height` times the highest are
/// dropped. Sorted by location.
std::vector<MarginalMode> marginal_modes(const std::vector<double>& values,
                                         double min_relative_height = 0.1,
                                         int grid_points = 512);

/// |s(x_hat) - y*|
double resim_error(const Problem& problem, const Vector& x_hat, const Vector& y_star);

struct RmseReport {
  double total = 0.0;
  Vector per_dim;
};

/// sqrt(mean_i |estimate_i - truth_i|^2); per_dim holds the same per column.
RmseReport rmse(const std::vector<Vector>& estimates, const std::vector<Vector>& truths);

struct TestCase {
  Vector x_star;
  Vector y_star;
};

/// Draws a test set from the prior with y* = s(x*).
std::vector<TestCase> make_test_set(const Problem& problem, Index n, std::uint64_t seed);

/// RMSE of mean-shift MAP estimates of sampled posteriors against x*.
RmseReport rmse_map(const InnModel& model, const std::vector<TestCase>& tests,
                    Index samples_per_posterior, std::uint64_t seed);

struct CalibrationCurve {
  std::vector<double> alpha;
  std::vector<double> alpha_inliers;
  double median_error = 0.0;
};

/// 0.01, 0.02, ..., 0.99
std::vector<double> default_alpha_grid();

/// Fraction of ground truths inside the central alpha-interval of each
/// marginal, averaged over observations and dimensions, for each alpha.
CalibrationCurve calibration_error(const std::vector<PosteriorSamples>& posteriors,
                                   const std::vector<Vector>& truths,
                                   const std::vector<double>& alpha_grid = default_alpha_grid());

/// Type-7 (linear interpolation) empirical quantile of sorted data.
double quantile_sorted(const std::vector<double>& sorted, double p);

struct LatentGridRow {
  double z0 = 0.0;
  double z1 = 0.0;
  int mode_id = -1;
  double distance = 0.0;
};

struct LatentGrid {
  double radius50 = 0.0;
  double radius90 = 0.0;
  std::vector<LatentGridRow> rows;
};

/// Radius of the circle holding `mass` of a 2-D standard normal.
double chi2_2d_radius(double mass);

/// Maps a regular grid over [-extent, extent]^2 through g(y*, z, 0) and labels
/// each point with its nearest mode centre. Requires K = 2. Without centres,
/// mode_id is -1 and distance is the re-simulation error when `problem` is
/// given, otherwise zero.
LatentGrid latent_grid(const InnModel& model, const Vector& y_star, int points_per_axis,
                       double extent, const std::vector<Vector>& mode_centers,
                       const Problem* problem = nullptr);

/// Where the samples of one GMM label's posterior landed.
struct ModeOccupancy {
  int label = 0;
  std::vector<double> nearest_fraction;  // per mode, sums to 1
  std::vector<double> label_mode_share;  // per mode of `label`, among samples nearest to one of them
  double correct_within = 0.0;           // within 3 sigma of a mode of `label`
  double wrong_within = 0.0;             // within 3 sigma of any other mode
};

ModeOccupancy mode_occupancy(const GmmSpec& spec, const Matrix& samples, int label);

}  // namespace inn

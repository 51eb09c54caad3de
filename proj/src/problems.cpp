// SPDX-License-Identifier: Apache-2.0
#include "inn/problems.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace inn {

Vector Problem::simulate(std::span<const double> x) const {
  Vector y(dims().y);
  simulate(x, std::span<double>(y.data(), static_cast<std::size_t>(y.size())));
  return y;
}

Matrix Problem::simulate(const Matrix& x) const {
  const FlowDims d = dims();
  if (x.cols() != d.x) throw ShapeError("simulate: expected " + std::to_string(d.x) + " columns");
  Matrix y(x.rows(), d.y);
  for (Index i = 0; i < x.rows(); ++i) {
    simulate(std::span<const double>(x.data() + i * d.x, static_cast<std::size_t>(d.x)),
             std::span<double>(y.data() + i * d.y, static_cast<std::size_t>(d.y)));
  }
  return y;
}

std::pair<Matrix, Matrix> Problem::sample_joint(Index n, Rng& rng) const {
  Matrix x = sample_prior(n, rng);
  Matrix y = simulate(x);
  return {std::move(x), std::move(y)};
}

Matrix Problem::sample_analytic_posterior(const Vector&, Index, Rng&) const {
  throw std::logic_error("problem '" + name() + "' has no analytic posterior");
}

// --- Gaussian mixture --------------------------------------------------------

Vector GmmSpec::center(int mode) const {
  const double deg = angle_offset_deg - 45.0 * static_cast<double>(mode);
  const double rad = deg * std::numbers::pi / 180.0;
  Vector c(2);
  c << radius * std::cos(rad), radius * std::sin(rad);
  return c;
}

std::vector<int> GmmSpec::modes_of(int label) const {
  std::vector<int> out;
  for (int m = 0; m < 8; ++m) {
    if (labels[static_cast<std::size_t>(m)] == label) out.push_back(m);
  }
  return out;
}

GmmDraw gmm_sample(const GmmSpec& spec, Index n, Rng& rng) {
  GmmDraw draw{Matrix(n, 2), Matrix::Zero(n, spec.label_count), {}};
  draw.modes.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const int mode = static_cast<int>(rng.below(8));
    const Vector c = spec.center(mode);
    draw.x(i, 0) = c(0) + spec.sigma * rng.normal();
    draw.x(i, 1) = c(1) + spec.sigma * rng.normal();
    draw.y(i, spec.labels[static_cast<std::size_t>(mode)]) = 1.0;
    draw.modes.push_back(mode);
  }
  return draw;
}

GmmDraw gmm_sample(const GmmSpec& spec, Index n, std::uint64_t seed) {
  Rng rng(seed);
  return gmm_sample(spec, n, rng);
}

Matrix gmm_true_posterior(const GmmSpec& spec, int label, Index n, Rng& rng) {
  const std::vector<int> modes = spec.modes_of(label);
  if (label < 0 || label >= spec.label_count || modes.empty()) {
    throw std::invalid_argument("invalid GMM label " + std::to_string(label));
  }
  Matrix x(n, 2);
  for (Index i = 0; i < n; ++i) {
    const Vector c = spec.center(modes[rng.below(modes.size())]);
    x(i, 0) = c(0) + spec.sigma * rng.normal();
    x(i, 1) = c(1) + spec.sigma * rng.normal();
  }
  return x;
}

Matrix gmm_true_posterior(const GmmSpec& spec, int label, Index n, std::uint64_t seed) {
  Rng rng(seed);
  return gmm_true_posterior(spec, label, n, rng);
}

GmmProblem::GmmProblem(GmmSpec spec, int width, int latent)
    : spec_(spec), width_(width), latent_(latent) {
  if (spec_.label_count < 1) throw std::invalid_argument("GMM needs at least one label");
  for (int l : spec_.labels) {
    if (l < 0 || l >= spec_.label_count) throw std::invalid_argument("GMM label out of range");
  }
}

FlowDims GmmProblem::dims() const { return {2, spec_.label_count, latent_, width_}; }

Matrix GmmProblem::sample_prior(Index n, Rng& rng) const { return gmm_sample(spec_, n, rng).x; }

int GmmProblem::nearest_mode(std::span<const double> x) const {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int m = 0; m < 8; ++m) {
    const Vector c = spec_.center(m);
    const double d = (x[0] - c(0)) * (x[0] - c(0)) + (x[1] - c(1)) * (x[1] - c(1));
    if (d < best_d) {
      best_d = d;
      best = m;
    }
  }
  return best;
}

void GmmProblem::simulate(std::span<const double> x, std::span<double> y) const {
  std::fill(y.begin(), y.end(), 0.0);
  y[static_cast<std::size_t>(spec_.labels[static_cast<std::size_t>(nearest_mode(x))])] = 1.0;
}

std::pair<Matrix, Matrix> GmmProblem::sample_joint(Index n, Rng& rng) const {
  GmmDraw d = gmm_sample(spec_, n, rng);
  return {std::move(d.x), std::move(d.y)};
}

Matrix GmmProblem::sample_analytic_posterior(const Vector& y_star, Index n, Rng& rng) const {
  if (y_star.size() != spec_.label_count) throw ShapeError("GMM posterior: y* width mismatch");
  Index label = 0;
  y_star.maxCoeff(&label);
  return gmm_true_posterior(spec_, static_cast<int>(label), n, rng);
}

std::vector<Vector> GmmProblem::mode_centers() const {
  std::vector<Vector> out;
  for (int m = 0; m < 8; ++m) out.push_back(spec_.center(m));
  return out;
}

// --- Inverse kinematics ------------------------------------------------------

std::array<double, 2> kinematics_forward(const KinematicsSpec& spec, std::span<const double> x) {
  const auto [l1, l2, l3] = spec.lengths;
  const double a1 = x[1];
  const double a2 = x[2] - x[1];
  const double a3 = x[3] - x[1] - x[2];
  return {x[0] + l1 * std::sin(a1) + l2 * std::sin(a2) + l3 * std::sin(a3),
          l1 * std::cos(a1) + l2 * std::cos(a2) + l3 * std::cos(a3)};
}

KinematicsProblem::KinematicsProblem(KinematicsSpec spec, int width, int latent)
    : spec_(spec), width_(width), latent_(latent) {}

FlowDims KinematicsProblem::dims() const { return {4, 2, latent_, width_}; }

Matrix KinematicsProblem::sample_prior(Index n, Rng& rng) const {
  Matrix x(n, 4);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < 4; ++j) x(i, j) = spec_.prior_std[static_cast<std::size_t>(j)] * rng.normal();
  }
  return x;
}

void KinematicsProblem::simulate(std::span<const double> x, std::span<double> y) const {
  const auto out = kinematics_forward(spec_, x);
  y[0] = out[0];
  y[1] = out[1];
}

// --- Tabulated pairs ---------------------------------------------------------

DatasetProblem::DatasetProblem(std::string name, Matrix x, Matrix y, int width, int latent)
    : name_(std::move(name)), x_(std::move(x)), y_(std::move(y)), width_(width), latent_(latent) {
  if (x_.rows() != y_.rows() || x_.rows() == 0) {
    throw std::invalid_argument("dataset needs the same, non-zero number of x and y rows");
  }
}

FlowDims DatasetProblem::dims() const {
  return {static_cast<int>(x_.cols()), static_cast<int>(y_.cols()), latent_, width_};
}

Matrix DatasetProblem::sample_prior(Index n, Rng& rng) const {
  Matrix out(n, x_.cols());
  for (Index i = 0; i < n; ++i) out.row(i) = x_.row(static_cast<Index>(rng.below(static_cast<std::size_t>(x_.rows()))));
  return out;
}

void DatasetProblem::simulate(std::span<const double>, std::span<double>) const {
  throw std::logic_error("dataset problem '" + name_ + "' has no simulator");
}

std::pair<Matrix, Matrix> DatasetProblem::sample_joint(Index n, Rng& rng) const {
  Matrix x(n, x_.cols());
  Matrix y(n, y_.cols());
  for (Index i = 0; i < n; ++i) {
    const auto r = static_cast<Index>(rng.below(static_cast<std::size_t>(x_.rows())));
    x.row(i) = x_.row(r);
    y.row(i) = y_.row(r);
  }
  return {std::move(x), std::move(y)};
}

}  // namespace inn

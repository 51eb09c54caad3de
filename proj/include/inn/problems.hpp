// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "inn/flow.hpp"
#include "inn/matrix.hpp"
#include "inn/rng.hpp"

namespace inn {

/// An inverse problem: a prior over x and a deterministic forward map y = s(x).
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::string name() const = 0;
  /// D, M, K and the default nominal width W.
  virtual FlowDims dims() const = 0;

  virtual Matrix sample_prior(Index n, Rng& rng) const = 0;
  /// Writes s(x) into y (length M).
  virtual void simulate(std::span<const double> x, std::span<double> y) const = 0;
  virtual bool has_simulator() const { return true; }

  Vector simulate(std::span<const double> x) const;
  Matrix simulate(const Matrix& x) const;

  /// Training pairs (x, s(x)).
  virtual std::pair<Matrix, Matrix> sample_joint(Index n, Rng& rng) const;

  virtual bool has_analytic_posterior() const { return false; }
  virtual Matrix sample_analytic_posterior(const Vector& y_star, Index n, Rng& rng) const;

  /// Cluster centres for latent-space analysis; empty when the prior has none.
  virtual std::vector<Vector> mode_centers() const { return {}; }
};

// --- Gaussian mixture --------------------------------------------------------

/// Eight equally weighted isotropic modes on a circle, labelled 4:2:1:1.
struct GmmSpec {
  double radius = 2.5;
  double angle_offset_deg = 90.0;  // first mode; later modes proceed clockwise
  double sigma = 0.2;
  std::array<int, 8> labels{0, 0, 0, 0, 1, 1, 2, 3};
  int label_count = 4;

  Vector center(int mode) const;
  std::vector<int> modes_of(int label) const;
};

struct GmmDraw {
  Matrix x;                // n x 2
  Matrix y;                // n x label_count, one-hot
  std::vector<int> modes;  // generating mode per row
};

GmmDraw gmm_sample(const GmmSpec& spec, Index n, std::uint64_t seed);
GmmDraw gmm_sample(const GmmSpec& spec, Index n, Rng& rng);
/// Samples from the exact posterior p(x | label): a uniform choice among the
/// label's modes, Gaussian within.
Matrix gmm_true_posterior(const GmmSpec& spec, int label, Index n, std::uint64_t seed);
Matrix gmm_true_posterior(const GmmSpec& spec, int label, Index n, Rng& rng);

class GmmProblem final : public Problem {
 public:
  explicit GmmProblem(GmmSpec spec = {}, int width = 16, int latent = 2);

  std::string name() const override { return "gmm"; }
  FlowDims dims() const override;
  Matrix sample_prior(Index n, Rng& rng) const override;
  /// Label of the nearest mode centre, one-hot.
  using Problem::simulate;
  void simulate(std::span<const double> x, std::span<double> y) const override;
  std::pair<Matrix, Matrix> sample_joint(Index n, Rng& rng) const override;
  bool has_analytic_posterior() const override { return true; }
  /// y_star is read through its largest entry.
  Matrix sample_analytic_posterior(const Vector& y_star, Index n, Rng& rng) const override;
  std::vector<Vector> mode_centers() const override;

  const GmmSpec& spec() const { return spec_; }
  int nearest_mode(std::span<const double> x) const;

 private:
  GmmSpec spec_;
  int width_;
  int latent_;
};

// --- Inverse kinematics ------------------------------------------------------

/// Planar arm on a vertical rail: x = (rail offset, three joint angles).
struct KinematicsSpec {
  std::array<double, 3> lengths{0.5, 0.5, 1.0};
  std::array<double, 4> prior_std{0.25, 0.5, 0.5, 0.5};
};

std::array<double, 2> kinematics_forward(const KinematicsSpec& spec, std::span<const double> x);

class KinematicsProblem final : public Problem {
 public:
  explicit KinematicsProblem(KinematicsSpec spec = {}, int width = 4, int latent = 2);

  std::string name() const override { return "kinematics"; }
  FlowDims dims() const override;
  Matrix sample_prior(Index n, Rng& rng) const override;
  using Problem::simulate;
  void simulate(std::span<const double> x, std::span<double> y) const override;

  const KinematicsSpec& spec() const { return spec_; }

 private:
  KinematicsSpec spec_;
  int width_;
  int latent_;
};

// --- Tabulated pairs ---------------------------------------------------------

/// Problem backed by a fixed table of (x, y) pairs. The prior is the empirical
/// distribution of the rows; there is no simulator.
class DatasetProblem final : public Problem {
 public:
  DatasetProblem(std::string name, Matrix x, Matrix y, int width, int latent);

  std::string name() const override { return name_; }
  FlowDims dims() const override;
  Matrix sample_prior(Index n, Rng& rng) const override;
  using Problem::simulate;
  void simulate(std::span<const double> x, std::span<double> y) const override;
  bool has_simulator() const override { return false; }
  std::pair<Matrix, Matrix> sample_joint(Index n, Rng& rng) const override;

 private:
  std::string name_;
  Matrix x_;
  Matrix y_;
  int width_;
  int latent_;
};

}  // namespace inn

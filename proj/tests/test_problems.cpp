// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "inn/abc.hpp"
#include "inn/problems.hpp"

using namespace inn;

namespace {

// y = x in two dimensions with a standard-normal prior.
class IdentityProblem final : public Problem {
 public:
  std::string name() const override { return "identity"; }
  FlowDims dims() const override { return {2, 2, 0, 2}; }
  Matrix sample_prior(Index n, Rng& rng) const override { return rng.normal_matrix(n, 2); }
  void simulate(std::span<const double> x, std::span<double> y) const override {
    y[0] = x[0];
    y[1] = x[1];
  }
};

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double e : v) out(i++) = e;
  return out;
}

// Counts per mode for rows lying exactly on centres or nearest to them.
std::vector<int> mode_counts(const GmmProblem& p, const Matrix& x) {
  std::vector<int> counts(8, 0);
  for (Index i = 0; i < x.rows(); ++i) {
    const double row[2] = {x(i, 0), x(i, 1)};
    ++counts[static_cast<std::size_t>(p.nearest_mode(row))];
  }
  return counts;
}

}  // namespace

TEST_CASE("mixture layout") {
  const GmmSpec spec;
  const Vector top = spec.center(0);
  CHECK(top(0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(top(1) == doctest::Approx(2.5));
  // Clockwise: the second mode is in the upper-right quadrant.
  const Vector next = spec.center(1);
  CHECK(next(0) > 0.0);
  CHECK(next(1) > 0.0);
  CHECK(spec.center(2)(0) == doctest::Approx(2.5));
  CHECK(spec.modes_of(0) == std::vector<int>{0, 1, 2, 3});
  CHECK(spec.modes_of(1) == std::vector<int>{4, 5});
  CHECK(spec.modes_of(2) == std::vector<int>{6});
  CHECK(spec.modes_of(3) == std::vector<int>{7});
  const GmmProblem p;
  CHECK(p.dims().x == 2);
  CHECK(p.dims().y == 4);
  CHECK(p.dims().z == 2);
}

TEST_CASE("degenerate mixture draws sit on the centres") {
  GmmSpec spec;
  spec.sigma = 0.0;
  const GmmDraw d = gmm_sample(spec, 200, 1);
  for (Index i = 0; i < 200; ++i) {
    const Vector c = spec.center(d.modes[static_cast<std::size_t>(i)]);
    CHECK(d.x(i, 0) == c(0));
    CHECK(d.x(i, 1) == c(1));
  }
}

TEST_CASE("labels are one-hot with 4:2:1:1 proportions") {
  const GmmSpec spec;
  const GmmDraw d = gmm_sample(spec, 100000, 2);
  std::vector<double> freq(4, 0.0);
  for (Index i = 0; i < d.y.rows(); ++i) {
    CHECK(d.y.row(i).sum() == 1.0);
    CHECK(d.y.row(i).maxCoeff() == 1.0);
    Index label = 0;
    d.y.row(i).maxCoeff(&label);
    CHECK(label == spec.labels[static_cast<std::size_t>(d.modes[static_cast<std::size_t>(i)])]);
    freq[static_cast<std::size_t>(label)] += 1e-5;
  }
  CHECK(freq[0] == doctest::Approx(0.5).epsilon(0.02));
  CHECK(std::abs(freq[1] - 0.25) < 0.01);
  CHECK(std::abs(freq[2] - 0.125) < 0.01);
  CHECK(std::abs(freq[3] - 0.125) < 0.01);
}

TEST_CASE("simulated labels agree with generating labels for separated modes") {
  const GmmProblem p;
  Rng rng(3);
  const GmmDraw d = gmm_sample(p.spec(), 5000, rng);
  CHECK(p.simulate(d.x) == d.y);
}

TEST_CASE("exact posterior of a label") {
  const GmmProblem p;
  SUBCASE("single-mode label stays in its component") {
    const Matrix x = gmm_true_posterior(p.spec(), 2, 10000, 4);
    const Vector c = p.spec().center(6);
    for (Index i = 0; i < x.rows(); ++i) {
      CHECK((x.row(i).transpose() - c).norm() < 6.0 * p.spec().sigma);
    }
  }
  SUBCASE("modes of a label share the mass equally") {
    const Matrix x = gmm_true_posterior(p.spec(), 0, 100000, 5);
    const std::vector<int> counts = mode_counts(p, x);
    for (int m : {0, 1, 2, 3}) CHECK(std::abs(counts[static_cast<std::size_t>(m)] / 1e5 - 0.25) < 0.02);
  }
  SUBCASE("degenerate spread returns the centre") {
    GmmSpec spec;
    spec.sigma = 0.0;
    const Matrix x = gmm_true_posterior(spec, 3, 50, 6);
    const Vector c = spec.center(7);
    for (Index i = 0; i < 50; ++i) CHECK(x.row(i) == c.transpose());
  }
  CHECK_THROWS_AS(gmm_true_posterior(p.spec(), 4, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(gmm_true_posterior(p.spec(), -1, 10, 1), std::invalid_argument);
}

TEST_CASE("arm forward map") {
  const KinematicsSpec spec;
  auto fwd = [&](std::initializer_list<double> x) {
    const std::vector<double> v(x);
    return kinematics_forward(spec, v);
  };
  auto y = fwd({0, 0, 0, 0});
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 2.0);
  for (double a : {-0.7, 0.0, 1.3}) {
    y = fwd({a, 0, 0, 0});
    CHECK(y[0] == a);
    CHECK(y[1] == 2.0);
  }
  y = fwd({0, std::numbers::pi / 2, 0, 0});
  CHECK(y[0] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(std::abs(y[1]) < 1e-15);
}

TEST_CASE("arm forward map is pure and mirror symmetric") {
  const KinematicsProblem p;
  Rng rng(7);
  const Matrix x = p.sample_prior(1000, rng);
  const Matrix y1 = p.simulate(x);
  CHECK(p.simulate(x) == y1);
  Matrix mirrored = -x;
  mirrored.col(0) = x.col(0);
  const Matrix y2 = p.simulate(mirrored);
  for (Index i = 0; i < 1000; ++i) {
    CHECK(y2(i, 0) == doctest::Approx(2.0 * x(i, 0) - y1(i, 0)).epsilon(1e-12));
    CHECK(y2(i, 1) == doctest::Approx(y1(i, 1)).epsilon(1e-12));
  }
}

TEST_CASE("arm prior has the configured spreads") {
  const KinematicsProblem p;
  Rng rng(8);
  const Matrix x = p.sample_prior(200000, rng);
  const std::array<double, 4> stds{0.25, 0.5, 0.5, 0.5};
  for (Index j = 0; j < 4; ++j) {
    const double mean = x.col(j).mean();
    const double sd = std::sqrt((x.col(j).array() - mean).square().mean());
    CHECK(std::abs(mean) < 0.01);
    CHECK(sd == doctest::Approx(stds[static_cast<std::size_t>(j)]).epsilon(0.01));
  }
  CHECK(p.dims().x == 4);
  CHECK(p.dims().y == 2);
  CHECK(p.dims().z == 2);
}

TEST_CASE("draws are reproducible per seed") {
  const KinematicsProblem p;
  Rng a(9);
  Rng b(9);
  CHECK(p.sample_joint(100, a).second == p.sample_joint(100, b).second);
  CHECK(gmm_sample(GmmSpec{}, 100, 10).x == gmm_sample(GmmSpec{}, 100, 10).x);
}

TEST_CASE("threshold sampler accepts only nearby draws") {
  const IdentityProblem p;
  const AbcResult r = abc_threshold(p, vec({0.0, 0.0}), 0.1, 200, 10000000, 11);
  REQUIRE(r.samples.rows() == 200);
  CHECK_FALSE(r.budget_exhausted);
  for (Index i = 0; i < r.samples.rows(); ++i) CHECK(r.samples.row(i).norm() < 0.1);
  CHECK(r.acceptance_rate() == doctest::Approx(200.0 / static_cast<double>(r.simulations)));
}

TEST_CASE("infinite threshold returns the first prior draws") {
  const KinematicsProblem p;
  const AbcResult r =
      abc_threshold(p, vec({0.0, 1.5}), std::numeric_limits<double>::infinity(), 50, 1000, 12);
  CHECK(r.simulations == 50);
  Rng rng(12);
  CHECK(r.samples == p.sample_prior(4096, rng).topRows(50));
}

TEST_CASE("threshold sampler reports exhaustion with the partial set") {
  const IdentityProblem p;
  const AbcResult r = abc_threshold(p, vec({0.0, 0.0}), 0.05, 1000, 5000, 13);
  CHECK(r.budget_exhausted);
  CHECK(r.simulations == 5000);
  CHECK(r.samples.rows() < 1000);
  for (Index i = 0; i < r.samples.rows(); ++i) CHECK(r.samples.row(i).norm() < 0.05);
}

TEST_CASE("threshold soundness on the arm") {
  const KinematicsProblem p;
  const Vector y_star = vec({0.0, 1.5});
  const AbcResult r = abc_threshold(p, y_star, 0.02, 2000, 100000000, 14);
  REQUIRE(r.samples.rows() == 2000);
  const Matrix y = p.simulate(r.samples);
  for (Index i = 0; i < y.rows(); ++i) CHECK((y.row(i).transpose() - y_star).norm() < 0.02);

  // The bent arm reaches 1.5 with the elbow on either side: x2 takes both signs.
  const Vector x2 = r.samples.col(1);
  const double positive = static_cast<double>((x2.array() > 0.1).count()) / 2e3;
  const double negative = static_cast<double>((x2.array() < -0.1).count()) / 2e3;
  CHECK(positive > 0.2);
  CHECK(negative > 0.2);
}

TEST_CASE("quantile sampler runs ceil(N / q) simulations") {
  CHECK(abc_quantile_simulations(10, 0.1) == 100);
  CHECK(abc_quantile_simulations(256, 0.005) == 51200);
  CHECK(abc_quantile_simulations(256, 0.01) == 25600);
  CHECK(abc_quantile_simulations(3, 0.5) == 6);
  CHECK(abc_quantile_simulations(1, 0.3) == 4);
  CHECK(abc_quantile_simulations(7, 1.0) == 7);
  CHECK_THROWS_AS(abc_quantile_simulations(10, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(abc_quantile_simulations(10, 1.5), std::invalid_argument);

  const IdentityProblem p;
  const Vector y_star = vec({0.5, -0.5});
  const AbcResult r = abc_quantile(p, y_star, 0.1, 10, 15);
  CHECK(r.simulations == 100);
  REQUIRE(r.samples.rows() == 10);
  Rng rng(15);
  const Matrix all = p.sample_prior(100, rng);
  std::vector<double> d(100);
  for (Index i = 0; i < 100; ++i) d[static_cast<std::size_t>(i)] = (all.row(i).transpose() - y_star).norm();
  std::sort(d.begin(), d.end());
  for (Index k = 0; k < 10; ++k) {
    CHECK((r.samples.row(k).transpose() - y_star).norm() == d[static_cast<std::size_t>(k)]);
  }
}

TEST_CASE("quantile one keeps every draw") {
  const IdentityProblem p;
  const AbcResult r = abc_quantile(p, vec({0.0, 0.0}), 1.0, 20, 16);
  CHECK(r.simulations == 20);
  Rng rng(16);
  const Matrix all = p.sample_prior(20, rng);
  // Same multiset of rows.
  int matched = 0;
  for (Index i = 0; i < 20; ++i) {
    for (Index j = 0; j < 20; ++j) matched += all.row(i) == r.samples.row(j) ? 1 : 0;
  }
  CHECK(matched == 20);
}

TEST_CASE("samplers validate their inputs") {
  const IdentityProblem p;
  CHECK_THROWS_AS(abc_threshold(p, vec({0.0, 0.0}), 0.0, 10, 100, 1), std::invalid_argument);
  CHECK_THROWS_AS(abc_threshold(p, vec({0.0, 0.0}), 1.0, 0, 100, 1), std::invalid_argument);
  CHECK_THROWS_AS(abc_threshold(p, vec({0.0}), 1.0, 10, 100, 1), ShapeError);
  DatasetProblem table("table", Matrix::Zero(4, 2), Matrix::Zero(4, 1), 3, 1);
  CHECK_THROWS_AS(abc_quantile(table, vec({0.0}), 0.5, 2, 1), std::invalid_argument);
}

TEST_CASE("tabulated problem resamples its rows") {
  Matrix x(3, 2);
  x << 1, 2, 3, 4, 5, 6;
  Matrix y(3, 1);
  y << 10, 20, 30;
  const DatasetProblem p("table", x, y, 4, 2);
  CHECK(p.dims().x == 2);
  CHECK(p.dims().y == 1);
  CHECK(p.dims().width == 4);
  CHECK_FALSE(p.has_simulator());
  Rng rng(17);
  auto [xs, ys] = p.sample_joint(100, rng);
  for (Index i = 0; i < 100; ++i) CHECK(ys(i, 0) == 10.0 * (xs(i, 1) / 2.0));
  CHECK_THROWS_AS(DatasetProblem("bad", x, Matrix::Zero(2, 1), 4, 2), std::invalid_argument);
}

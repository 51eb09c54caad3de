// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "inn/flow.hpp"
#include "oracles.hpp"

using namespace inn;

namespace {

void zero_all(InnModel& model) {
  for (ad::Parameter* p : model.parameters()) p->value.setZero();
}

void zero_net(Subnet& net) {
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    net.weight(l).value.setZero();
    net.bias(l).value.setZero();
  }
}

// Untrained weights are small; scaling them up exercises the clamp and makes
// the maps visibly non-linear.
void scale_weights(InnModel& model, double factor) {
  for (ad::Parameter* p : model.parameters()) p->value *= factor;
}

// Inverse-permuted copy: what a flow of identity blocks does to its input.
Matrix apply_permutations(const InnModel& model, Matrix x) {
  for (const auto& layer : model.layers()) {
    if (const auto* p = std::get_if<PermutationLayer>(&layer)) {
      Matrix out(x.rows(), x.cols());
      for (Index j = 0; j < x.cols(); ++j) out.col(j) = x.col(p->perm()[static_cast<std::size_t>(j)]);
      x = out;
    }
  }
  return x;
}

Matrix full_forward(const InnModel& model, const Matrix& x) {
  const FlowOutput out = model.forward(x);
  Matrix full(x.rows(), model.dims().width);
  full << out.y, out.z, out.pad;
  return full;
}

Matrix full_inverse(const InnModel& model, const Matrix& v) {
  const FlowDims& d = model.dims();
  return model.inverse(v.leftCols(d.y), v.middleCols(d.y, d.z), v.rightCols(model.output_pad_width()));
}

std::vector<int> small_hidden() { return {8, 8}; }

}  // namespace

TEST_CASE("clamp examples") {
  CHECK(clamp_s(0.0, 0.7) == 0.0);
  CHECK(clamp_s(0.0, 3.0) == 0.0);
  CHECK(clamp_s(2.0, 2.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(clamp_s(1e6, 2.0) < 2.0);
  CHECK(clamp_s(1e6, 2.0) == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(clamp_s(1e300, 2.0) <= 2.0);
  CHECK(clamp_s(-1e300, 2.0) >= -2.0);
}

TEST_CASE("clamp is odd and strictly increasing") {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double c = 0.5 + 4.5 * rng.uniform();
    const double a = 10.0 * rng.normal();
    const double b = a + 1e-3 + rng.uniform();
    CHECK(clamp_s(-a, c) == -clamp_s(a, c));
    CHECK(clamp_s(a, c) < clamp_s(b, c));
    CHECK(std::abs(clamp_s(a, c)) < c);
  }
}

TEST_CASE("coupling block with zero subnets is the identity") {
  Rng rng(2);
  const auto hidden = small_hidden();
  CouplingBlock block("b", 5, hidden, 0.01, 2.0, rng);
  zero_net(block.first_net());
  zero_net(block.second_net());
  const Matrix u = rng.normal_matrix(7, 5);
  const auto [v, logdet] = block.forward(u);
  CHECK(v == u);
  CHECK(logdet.isZero(0.0));
  CHECK(block.inverse(u) == u);
}

TEST_CASE("coupling block hand-computed example") {
  Rng rng(3);
  const auto hidden = small_hidden();
  CouplingBlock block("b", 2, hidden, 0.01, 2.0, rng);
  // Final layer of the first net emits constants: clamped scale ln 2, shift 1.
  Subnet& first = block.first_net();
  const std::size_t last = first.layer_count() - 1;
  first.weight(last).value.setZero();
  const double c = 2.0;
  const double raw = c * std::tan(std::log(2.0) * std::numbers::pi / (2.0 * c));
  first.bias(last).value << raw, 1.0;
  zero_net(block.second_net());

  Matrix u(1, 2);
  u << 3.0, 5.0;
  const auto [v, logdet] = block.forward(u);
  CHECK(v(0, 0) == doctest::Approx(7.0).epsilon(1e-14));
  CHECK(v(0, 1) == 5.0);
  CHECK(logdet(0) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  const Matrix back = block.inverse(v);
  CHECK(std::abs(back(0, 0) - 3.0) < 1e-14);
  CHECK(back(0, 1) == 5.0);
}

TEST_CASE("coupling block round trip over many rows") {
  Rng rng(4);
  const auto hidden = small_hidden();
  for (int width : {2, 3, 7, 16}) {
    CouplingBlock block("b", width, hidden, 0.01, 2.0, rng);
    const Matrix u = 2.0 * rng.normal_matrix(1000, width);
    CHECK(oracle::max_abs_diff(block.inverse(block.forward(u).first), u) < 1e-9);
  }
}

TEST_CASE("coupling block log-Jacobian matches the finite-difference determinant") {
  Rng rng(5);
  const auto hidden = small_hidden();
  for (int width : {2, 3, 4}) {
    CouplingBlock block("b", width, hidden, 0.01, 2.0, rng);
    const Vector u = rng.normal_matrix(1, width).row(0).transpose();
    const auto f = [&](const Vector& in) -> Vector {
      return block.forward(Matrix(in.transpose())).first.row(0).transpose();
    };
    const double det = oracle::fd_jacobian_det(f, u);
    const double logdet = block.forward(Matrix(u.transpose())).second(0);
    CHECK(oracle::rel_error(std::exp(logdet), det, 0.0) < 1e-4);
  }
}

TEST_CASE("taped coupling inverse matches the plain inverse") {
  Rng rng(6);
  const auto hidden = small_hidden();
  const CouplingBlock block("b", 5, hidden, 0.01, 2.0, rng);
  const Matrix v = rng.normal_matrix(4, 5);
  ad::Tape tape;
  CHECK(block.inverse(tape, tape.constant(v)).value() == block.inverse(v));
}

TEST_CASE("coupling block rejects wrong widths") {
  Rng rng(7);
  const auto hidden = small_hidden();
  const CouplingBlock block("b", 4, hidden, 0.01, 2.0, rng);
  CHECK_THROWS_AS(block.forward(Matrix::Zero(2, 3)), ShapeError);
  CHECK_THROWS_AS(block.inverse(Matrix::Zero(2, 5)), ShapeError);
  CHECK_THROWS_AS(CouplingBlock("b", 4, hidden, 0.01, 0.0, rng), std::invalid_argument);
}

TEST_CASE("permutation layer composes to the identity") {
  Rng rng(8);
  const PermutationLayer layer(rng.permutation(9));
  for (std::size_t j = 0; j < 9; ++j) {
    CHECK(layer.inverse_perm()[static_cast<std::size_t>(layer.perm()[j])] == static_cast<int>(j));
  }
  CHECK_THROWS_AS(PermutationLayer({0, 2, 2}), std::invalid_argument);
}

TEST_CASE("zero-weight model permutes its input") {
  ModelConfig cfg;
  cfg.blocks = 4;
  cfg.hidden = small_hidden();
  cfg.seed = 9;
  InnModel model({3, 2, 2, 6}, cfg);
  zero_all(model);
  Rng rng(9);
  const Matrix x = model.pad_input(rng.normal_matrix(5, 3));
  const FlowOutput out = model.forward(x);
  CHECK(full_forward(model, x) == apply_permutations(model, x));
  CHECK(out.logdet.isZero(0.0));
  const Matrix v = rng.normal_matrix(5, 6);
  CHECK(apply_permutations(model, full_inverse(model, v)) == v);
}

TEST_CASE("flow output layout widths") {
  ModelConfig cfg;
  cfg.hidden = small_hidden();
  const InnModel model({2, 4, 2, 16}, cfg);
  const FlowOutput out = model.forward(model.pad_input(Matrix::Ones(3, 2)));
  CHECK(out.y.cols() == 4);
  CHECK(out.z.cols() == 2);
  CHECK(out.pad.cols() == 10);
  CHECK(out.logdet.size() == 3);
  CHECK(model.output_pad_width() == 10);
  CHECK(model.input_pad_width() == 14);
}

TEST_CASE("model construction validates its dimensions") {
  ModelConfig cfg;
  CHECK_THROWS_AS(InnModel({4, 2, 2, 3}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(InnModel({2, 4, 2, 5}, cfg), std::invalid_argument);
  cfg.blocks = 0;
  CHECK_THROWS_AS(InnModel({2, 0, 2, 2}, cfg), std::invalid_argument);
}

TEST_CASE("model is bijective in both directions") {
  Rng rng(10);
  for (int trial = 0; trial < 6; ++trial) {
    ModelConfig cfg;
    cfg.blocks = 1 + trial;
    cfg.hidden = {128, 128};
    cfg.clamp = 0.5 + trial;
    cfg.seed = 100 + trial;
    const int width = 2 + 5 * trial;
    InnModel model({std::max(1, width - 1), 1, 1, width}, cfg);
    const Matrix x = rng.normal_matrix(1000, width);
    CHECK(oracle::max_abs_diff(full_inverse(model, full_forward(model, x)), x) < 1e-9);
    CHECK(oracle::max_abs_diff(full_forward(model, full_inverse(model, x)), x) < 1e-9);
  }
}

TEST_CASE("model log-Jacobian is the sum of block log-Jacobians") {
  ModelConfig cfg;
  cfg.blocks = 4;
  cfg.hidden = small_hidden();
  cfg.seed = 11;
  const InnModel model({3, 1, 2, 5}, cfg);
  Rng rng(11);
  const Matrix x = rng.normal_matrix(20, 5);
  Matrix h = x;
  Vector total = Vector::Zero(20);
  for (const auto& layer : model.layers()) {
    if (const auto* block = std::get_if<CouplingBlock>(&layer)) {
      auto [v, logdet] = block->forward(h);
      h = v;
      total += logdet;
    } else {
      const auto& perm = std::get<PermutationLayer>(layer).perm();
      Matrix out(h.rows(), h.cols());
      for (Index j = 0; j < h.cols(); ++j) out.col(j) = h.col(perm[static_cast<std::size_t>(j)]);
      h = out;
    }
  }
  CHECK(model.forward(x).logdet == total);
  CHECK(full_forward(model, x) == h);
}

TEST_CASE("width-2 model log-Jacobian matches the finite-difference determinant") {
  Rng rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    ModelConfig cfg;
    cfg.blocks = 3;
    cfg.hidden = small_hidden();
    cfg.seed = 200 + trial;
    InnModel model({2, 0, 2, 2}, cfg);
    scale_weights(model, 1.5);
    const Vector x = rng.normal_matrix(1, 2).row(0).transpose();
    const auto f = [&](const Vector& in) -> Vector {
      return full_forward(model, Matrix(in.transpose())).row(0).transpose();
    };
    // Permutations may flip the sign; the log-Jacobian is of |det|.
    const double det = std::abs(oracle::fd_jacobian_det(f, x));
    CHECK(oracle::rel_error(std::exp(model.forward(Matrix(x.transpose())).logdet(0)), det, 0.0) <
          1e-4);
  }
}

TEST_CASE("log conditional density of the identity flow") {
  ModelConfig cfg;
  cfg.blocks = 1;
  cfg.hidden = small_hidden();
  InnModel model({2, 0, 2, 2}, cfg);
  zero_all(model);
  const double log2pi = std::log(2.0 * std::numbers::pi);
  CHECK(model.log_conditional_density(Matrix::Zero(1, 2))(0) ==
        doctest::Approx(-log2pi).epsilon(1e-15));
  Matrix x(1, 2);
  x << 1.0, 0.0;
  CHECK(model.log_conditional_density(x)(0) == doctest::Approx(-log2pi - 0.5).epsilon(1e-15));

  InnModel three({3, 0, 3, 3}, cfg);
  zero_all(three);
  CHECK(three.log_conditional_density(Matrix::Zero(1, 3))(0) ==
        doctest::Approx(-1.5 * log2pi).epsilon(1e-15));
}

TEST_CASE("density ranking ignores an appended permutation") {
  ModelConfig cfg;
  cfg.blocks = 3;
  cfg.hidden = small_hidden();
  cfg.seed = 13;
  InnModel model({3, 1, 2, 4}, cfg);
  Rng rng(13);
  const Matrix x = rng.normal_matrix(100, 4);
  const Vector before = model.log_conditional_density(x);
  InnModel extended = model;
  std::vector<int> perm{0, 1, 2, 3};  // keeps y first so z stays z
  extended.append_permutation(perm);
  const Vector after = extended.log_conditional_density(x);
  std::vector<Index> a(100);
  std::vector<Index> b(100);
  for (Index i = 0; i < 100; ++i) a[static_cast<std::size_t>(i)] = b[static_cast<std::size_t>(i)] = i;
  std::sort(a.begin(), a.end(), [&](Index i, Index j) { return before(i) < before(j); });
  std::sort(b.begin(), b.end(), [&](Index i, Index j) { return after(i) < after(j); });
  CHECK(a == b);
  CHECK(oracle::max_abs_diff(before, after) < 1e-12);
}

TEST_CASE("inverse-mapped normals follow the change-of-variables density") {
  ModelConfig cfg;
  cfg.blocks = 3;
  cfg.hidden = small_hidden();
  cfg.seed = 14;
  InnModel model({2, 0, 2, 2}, cfg);
  const Index n = 100000;
  Rng rng(14);
  const Matrix x = model.inverse(Matrix::Zero(n, 0), rng.normal_matrix(n, 2), Matrix::Zero(n, 0));

  // Histogram box: central 99.8% of each coordinate.
  std::vector<double> lo(2);
  std::vector<double> hi(2);
  for (int c = 0; c < 2; ++c) {
    std::vector<double> col(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = x(i, c);
    std::sort(col.begin(), col.end());
    lo[c] = col[static_cast<std::size_t>(n / 1000)];
    hi[c] = col[static_cast<std::size_t>(n - n / 1000)];
  }
  const int bins = 30;
  const int sub = 4;
  const double w0 = (hi[0] - lo[0]) / bins;
  const double w1 = (hi[1] - lo[1]) / bins;
  Matrix hist = Matrix::Zero(bins, bins);
  double inside = 0.0;
  for (Index i = 0; i < n; ++i) {
    const auto b0 = static_cast<int>(std::floor((x(i, 0) - lo[0]) / w0));
    const auto b1 = static_cast<int>(std::floor((x(i, 1) - lo[1]) / w1));
    if (b0 < 0 || b0 >= bins || b1 < 0 || b1 >= bins) continue;
    hist(b0, b1) += 1.0 / static_cast<double>(n);
    inside += 1.0 / static_cast<double>(n);
  }
  // Midpoint rule on a sub-grid of each bin.
  const int fine = bins * sub;
  Matrix points(fine * fine, 2);
  for (int i = 0; i < fine; ++i) {
    for (int j = 0; j < fine; ++j) {
      points(i * fine + j, 0) = lo[0] + (i + 0.5) * w0 / sub;
      points(i * fine + j, 1) = lo[1] + (j + 0.5) * w1 / sub;
    }
  }
  const Vector logp = model.log_conditional_density(points);
  Matrix mass = Matrix::Zero(bins, bins);
  double predicted_inside = 0.0;
  for (int i = 0; i < fine; ++i) {
    for (int j = 0; j < fine; ++j) {
      const double m = std::exp(logp(i * fine + j)) * (w0 / sub) * (w1 / sub);
      mass(i / sub, j / sub) += m;
      predicted_inside += m;
    }
  }
  const double tv = 0.5 * ((hist - mass).cwiseAbs().sum() + std::abs(inside - predicted_inside));
  CHECK(tv < 0.05);
}

TEST_CASE("inverse rejects inconsistent widths") {
  ModelConfig cfg;
  cfg.hidden = small_hidden();
  const InnModel model({2, 1, 1, 4}, cfg);
  CHECK_THROWS_AS(model.inverse(Matrix::Zero(2, 2), Matrix::Zero(2, 1), Matrix::Zero(2, 2)),
                  ShapeError);
  CHECK_THROWS_AS(model.forward(Matrix::Zero(2, 3)), ShapeError);
  CHECK_THROWS_AS(model.pad_input(Matrix::Zero(2, 3)), ShapeError);
}

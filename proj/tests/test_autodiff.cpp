// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "inn/adam.hpp"
#include "inn/autodiff.hpp"
#include "inn/subnet.hpp"
#include "gradient_cases.hpp"
#include "oracles.hpp"

using namespace inn;
using ad::Tape;
using ad::Var;


TEST_CASE("exp of zeros is ones") {
  Tape t;
  const Var e = ad::exp(t.constant(Matrix::Zero(2, 3)));
  CHECK(e.value() == Matrix::Ones(2, 3));
}

TEST_CASE("leaky rectifier definition") {
  Tape t;
  Matrix x(1, 2);
  x << -1.0, 2.0;
  const Var y = ad::leaky_relu(t.constant(x), 0.01);
  CHECK(y.value()(0, 0) == doctest::Approx(-0.01).epsilon(1e-15));
  CHECK(y.value()(0, 1) == 2.0);
  CHECK_THROWS_AS(ad::leaky_relu(t.constant(x), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(ad::leaky_relu(t.constant(x), -0.1), std::invalid_argument);
}

TEST_CASE("matmul matches a triple loop") {
  Rng rng(3);
  const Matrix a = rng.normal_matrix(2, 3);
  const Matrix b = rng.normal_matrix(3, 2);
  Tape t;
  const Var c = ad::matmul(t.constant(a), t.constant(b));
  CHECK(oracle::max_abs_diff(c.value(), oracle::naive_matmul(a, b)) < 1e-12);
}

TEST_CASE("shape mismatches and non-finite values are rejected") {
  Tape t;
  const Var a = t.constant(Matrix::Ones(2, 3));
  const Var b = t.constant(Matrix::Ones(3, 3));
  CHECK_THROWS_AS(ad::add(a, b), ShapeError);
  CHECK_THROWS_AS(ad::matmul(a, a), ShapeError);
  CHECK_THROWS_AS(ad::add_row(a, t.constant(Matrix::Ones(2, 3))), ShapeError);
  CHECK_THROWS_AS(ad::slice_cols(a, 2, 2), ShapeError);
  const std::vector<int> bad_perm{0, 0, 1};
  CHECK_THROWS_AS(ad::permute_cols(a, bad_perm), ShapeError);
  CHECK_THROWS_AS(ad::exp(t.constant(Matrix::Constant(1, 1, 800.0))), NumericError);
  CHECK_THROWS_AS(t.constant(Matrix::Constant(1, 1, std::nan(""))), NumericError);
  CHECK_THROWS_AS(t.backward(a), ShapeError);
}

TEST_CASE("backward of a bound scalar parameter") {
  ad::Parameter w("w", Matrix::Constant(1, 1, 0.7));
  Tape t;
  const Var v = t.bind(w);
  t.backward(v);
  CHECK(w.grad(0, 0) == 1.0);
}

TEST_CASE("backward of a sum of squares") {
  Matrix init(1, 2);
  init << 1.0, 2.0;
  ad::Parameter w("w", init);
  Tape t;
  const Var wv = t.bind(w);
  t.backward(ad::sum(ad::mul(wv, wv)));
  CHECK(w.grad(0, 0) == 2.0);
  CHECK(w.grad(0, 1) == 4.0);
}

TEST_CASE("every primitive matches central differences") {
  for (const gradient_cases::Case& c : gradient_cases::primitives()) {
    CAPTURE(c.name);
    CHECK(oracle::gradient_check(c.build, c.inputs) < 1e-4);
  }
}

TEST_CASE("stop_gradient blocks the flow of gradients") {
  Tape t;
  const Var a = t.variable(Matrix::Constant(1, 1, 3.0));
  const Var out = ad::sum(ad::mul(a, ad::stop_gradient(a)));
  t.backward(out);
  CHECK(t.grad(a)(0, 0) == 3.0);
}

TEST_CASE("the gradient check flags a missing gradient") {
  const oracle::GraphFn blocked = [](Tape&, std::span<const Var> v) {
    return ad::sum(ad::square(ad::stop_gradient(v[0])));
  };
  CHECK(oracle::gradient_check(blocked, {Matrix::Constant(2, 2, 0.5)}) > 0.5);
}

TEST_CASE("random composite graphs match central differences") {
  for (int g = 0; g < 20; ++g) {
    const gradient_cases::Case c = gradient_cases::composite(1000 + g);
    CAPTURE(c.name);
    CHECK(oracle::gradient_check(c.build, c.inputs) < 1e-4);
  }
}

TEST_CASE("backward accumulates into parameter gradients") {
  Rng rng(5);
  ad::Parameter p("p", rng.normal_matrix(2, 3));
  Tape t;
  const Var out = ad::sum(ad::atan(ad::square(t.bind(p))));
  t.backward(out);
  const Matrix once = p.grad;
  t.backward(out);
  CHECK(p.grad == 2.0 * once);
}

TEST_CASE("graph construction and backward are deterministic") {
  auto run = [] {
    Rng rng(9);
    std::vector<int> hidden{5, 5};
    Subnet net("net", 3, hidden, 2, 0.01, rng);
    Tape t;
    const Var out = ad::mean(ad::square(net.forward(t, t.constant(rng.normal_matrix(7, 3)))));
    t.backward(out);
    return std::pair{out.value()(0, 0), net.weight(0).grad};
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("adam leaves parameters alone on a zero gradient") {
  Rng rng(2);
  ad::Parameter p("p", rng.normal_matrix(2, 2));
  const Matrix before = p.value;
  std::vector<ad::Parameter*> params{&p};
  ad::adam_step(params, 0.1);
  CHECK(p.value == before);
  CHECK(p.step == 1);
}

TEST_CASE("adam first step moves by the learning rate against the gradient") {
  Matrix init(1, 3);
  init << 1.0, -2.0, 0.5;
  ad::Parameter p("p", init);
  p.grad << 0.3, -4.0, 1e-3;
  std::vector<ad::Parameter*> params{&p};
  ad::adam_step(params, 0.01);
  CHECK(p.value(0, 0) == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
  CHECK(p.value(0, 1) == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
  CHECK(p.value(0, 2) == doctest::Approx(0.5 - 0.01).epsilon(1e-4));
  CHECK(p.grad.isZero(0.0));
}

TEST_CASE("adam two steps against the recurrences") {
  const double g = 0.5;
  const double lr = 0.01;
  double m = 0.0;
  double v = 0.0;
  double x = 1.0;
  for (int t = 1; t <= 2; ++t) {
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    x -= lr * mh / (std::sqrt(vh) + 1e-8);
  }
  ad::Parameter p("p", Matrix::Constant(1, 1, 1.0));
  std::vector<ad::Parameter*> params{&p};
  for (int t = 0; t < 2; ++t) {
    p.grad(0, 0) = g;
    ad::adam_step(params, lr);
  }
  CHECK(std::abs(p.value(0, 0) - x) < 1e-10);
  CHECK(p.step == 2);
}

TEST_CASE("adam rejects a non-positive learning rate") {
  ad::Parameter p("p", Matrix::Zero(1, 1));
  std::vector<ad::Parameter*> params{&p};
  CHECK_THROWS(ad::adam_step(params, 0.0));
}

TEST_CASE("subnet with zero weights outputs zeros") {
  Rng rng(1);
  std::vector<int> hidden{4};
  Subnet net("net", 3, hidden, 5, 0.01, rng);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    net.weight(l).value.setZero();
    net.bias(l).value.setZero();
  }
  Tape t;
  const Var out = net.forward(t, t.constant(rng.normal_matrix(6, 3)));
  CHECK(out.value() == Matrix::Zero(6, 5));
}

TEST_CASE("single-layer subnet with identity weight adds the bias") {
  Rng rng(1);
  Subnet net("net", 3, {}, 3, 0.01, rng);
  net.weight(0).value = Matrix::Identity(3, 3);
  net.bias(0).value << 1.0, -2.0, 0.5;
  const Matrix x = rng.normal_matrix(4, 3);
  Tape t;
  const Var out = net.forward(t, t.constant(x));
  CHECK(oracle::max_abs_diff(out.value(), x.rowwise() + net.bias(0).value.row(0)) == 0.0);
}

TEST_CASE("three-layer subnet against a plain re-evaluation") {
  Rng rng(4);
  std::vector<int> hidden{6, 5};
  Subnet net("net", 3, hidden, 2, 0.01, rng);
  for (std::size_t l = 0; l < net.layer_count(); ++l) net.bias(l).value = rng.normal_matrix(1, net.bias(l).value.cols());
  const Matrix x = rng.normal_matrix(8, 3);
  Matrix h = x;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    h = oracle::naive_matmul(h, net.weight(l).value);
    for (Index r = 0; r < h.rows(); ++r) h.row(r) += net.bias(l).value.row(0);
    if (l + 1 < net.layer_count()) h = h.unaryExpr([](double v) { return v > 0 ? v : 0.01 * v; });
  }
  Tape t;
  CHECK(oracle::max_abs_diff(net.forward(t, t.constant(x)).value(), h) < 1e-12);
}

TEST_CASE("three-layer subnet parameter gradients match central differences") {
  Rng rng(8);
  std::vector<int> hidden{5, 4};
  Subnet net("net", 3, hidden, 2, 0.01, rng);
  for (std::size_t l = 0; l < net.layer_count(); ++l) net.bias(l).value = 0.3 * rng.normal_matrix(1, net.bias(l).value.cols());
  const Matrix x = rng.normal_matrix(5, 3);
  std::vector<ad::Parameter*> params;
  net.collect_parameters(params);

  auto loss = [&](Tape& t) { return ad::mean(ad::atan(net.forward(t, t.constant(x)))); };
  Tape t;
  t.backward(loss(t));
  double worst = 0.0;
  for (ad::Parameter* p : params) {
    for (Index i = 0; i < p->value.size(); ++i) {
      double& entry = p->value.data()[i];
      const double keep = entry;
      entry = keep + 1e-5;
      Tape up(false);
      const double fu = loss(up).value()(0, 0);
      entry = keep - 1e-5;
      Tape down(false);
      const double fd = loss(down).value()(0, 0);
      entry = keep;
      worst = std::max(worst, oracle::rel_error(p->grad.data()[i], (fu - fd) / 2e-5));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("tape without gradients binds parameters as constants") {
  ad::Parameter p("p", Matrix::Ones(1, 1));
  Tape t(false);
  const Var v = t.bind(p);
  CHECK_FALSE(t.requires_grad(v));
}

// SPDX-License-Identifier: Apache-2.0
#include "inn/mmd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace inn {

std::string_view kernel_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::kInverseMultiquadratic:
      return "inverse_multiquadratic";
    case KernelKind::kMultiquadratic:
      return "multiquadratic";
  }
  return "unknown";
}

KernelKind parse_kernel_kind(std::string_view name) {
  if (name == "inverse_multiquadratic") return KernelKind::kInverseMultiquadratic;
  if (name == "multiquadratic") return KernelKind::kMultiquadratic;
  throw std::invalid_argument("unknown kernel '" + std::string(name) + "'");
}

namespace {

// Kernel value and its derivative with respect to the squared distance.
struct KernelPoint {
  double value;
  double slope;
};

inline KernelPoint kernel_at(const KernelSpec& spec, double dist2) {
  const double inv_h2 = 1.0 / (spec.h * spec.h);
  const double r = 1.0 + dist2 * inv_h2;
  if (spec.kind == KernelKind::kInverseMultiquadratic) {
    const double k = 1.0 / r;
    return {k, -k * k * inv_h2};
  }
  const double root = std::sqrt(r);
  return {-root, -0.5 * inv_h2 / root};
}

inline double squared_distance(const Matrix& a, Index i, const Matrix& b, Index j) {
  double acc = 0.0;
  const double* pa = a.data() + i * a.cols();
  const double* pb = b.data() + j * b.cols();
  for (Index c = 0; c < a.cols(); ++c) {
    const double d = pa[c] - pb[c];
    acc += d * d;
  }
  return acc;
}

// mean_{i,j} k(a_i, b_j)
double kernel_mean(const Matrix& a, const Matrix& b, const KernelSpec& spec) {
  double total = 0.0;
  for (Index i = 0; i < a.rows(); ++i) {
    double row = 0.0;
    for (Index j = 0; j < b.rows(); ++j) row += kernel_at(spec, squared_distance(a, i, b, j)).value;
    total += row;
  }
  return total / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

// Adds coeff * d/da and coeff * d/db of kernel_mean(a, b) into ga and gb.
void kernel_mean_grad(const Matrix& a, const Matrix& b, const KernelSpec& spec, double coeff,
                      Matrix& ga, Matrix& gb) {
  const double w = 2.0 * coeff / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
  const Index cols = a.cols();
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < b.rows(); ++j) {
      const double f = w * kernel_at(spec, squared_distance(a, i, b, j)).slope;
      for (Index c = 0; c < cols; ++c) {
        const double d = f * (a(i, c) - b(j, c));
        ga(i, c) += d;
        gb(j, c) -= d;
      }
    }
  }
}

bool lexicographically_less(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) return a.rows() < b.rows();
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

void check_operands(const Matrix& x, const Matrix& y, const KernelSpec& spec) {
  if (x.cols() != y.cols()) {
    throw ShapeError("mmd2: width mismatch " + shape_string(x) + " vs " + shape_string(y));
  }
  if (x.rows() == 0 || y.rows() == 0) throw ShapeError("mmd2: empty sample set");
  if (!(spec.h > 0.0)) throw std::invalid_argument("mmd2: kernel bandwidth must be positive");
}

}  // namespace

double kernel_eval(const KernelSpec& spec, std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("kernel_eval: width mismatch");
  double dist2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    dist2 += d * d;
  }
  return kernel_at(spec, dist2).value;
}

double mmd2(const Matrix& x, const Matrix& y, const KernelSpec& spec) {
  check_operands(x, y, spec);
  const double xx = kernel_mean(x, x, spec);
  const double yy = kernel_mean(y, y, spec);
  const double xy = lexicographically_less(y, x) ? kernel_mean(y, x, spec) : kernel_mean(x, y, spec);
  return (xx + yy) - 2.0 * xy;
}

ad::Var mmd2(ad::Var x, ad::Var y, const KernelSpec& spec) {
  Matrix out(1, 1);
  out(0, 0) = mmd2(x.value(), y.value(), spec);
  return x.tape().record(
      std::move(out), {x, y},
      [x, y, spec](ad::Tape& t, const Matrix& g) {
        const Matrix& xv = x.value();
        const Matrix& yv = y.value();
        Matrix gx = Matrix::Zero(xv.rows(), xv.cols());
        Matrix gy = Matrix::Zero(yv.rows(), yv.cols());
        const double scale = g(0, 0);
        if (t.requires_grad(x)) kernel_mean_grad(xv, xv, spec, scale, gx, gx);
        if (t.requires_grad(y)) kernel_mean_grad(yv, yv, spec, scale, gy, gy);
        kernel_mean_grad(xv, yv, spec, -2.0 * scale, gx, gy);
        t.accumulate(x, gx);
        t.accumulate(y, gy);
      },
      "mmd2");
}

}  // namespace inn

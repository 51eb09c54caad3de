// SPDX-License-Identifier: Apache-2.0
#include "inn/autodiff.hpp"

#include <cmath>
#include <utility>

namespace inn::ad {

Parameter::Parameter(std::string name_in, Matrix init)
    : name(std::move(name_in)),
      value(std::move(init)),
      grad(Matrix::Zero(value.rows(), value.cols())),
      m(Matrix::Zero(value.rows(), value.cols())),
      v(Matrix::Zero(value.rows(), value.cols())) {}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
  require_finite(value, "constant");
  return push(Node{std::move(value), {}, {}, nullptr, false});
}

Var Tape::variable(Matrix value) {
  require_finite(value, "variable");
  return push(Node{std::move(value), {}, {}, nullptr, grad_enabled_});
}

Var Tape::bind(Parameter& param) {
  if (!grad_enabled_) return constant(param.value);
  require_finite(param.value, param.name);
  return push(Node{param.value, {}, {}, &param, true});
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backprop backprop,
                 std::string_view op) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                std::move(backprop), op);
}

Var Tape::record(Matrix value, std::span<const Var> parents, Backprop backprop,
                 std::string_view op) {
  require_finite(value, op);
  bool needs = false;
  if (grad_enabled_) {
    for (const Var& p : parents) needs = needs || nodes_[p.id_].requires_grad;
  }
  Node node{std::move(value), {}, {}, nullptr, needs};
  if (needs) node.backprop = std::move(backprop);
  return push(std::move(node));
}

Matrix Tape::grad(Var v) const {
  const Node& node = nodes_[v.id_];
  if (node.grad.size() == 0) return Matrix::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

void Tape::accumulate(Var target, const Matrix& g) {
  Node& node = nodes_[target.id_];
  if (!node.requires_grad) return;
  if (node.grad.size() == 0) {
    node.grad = g;
  } else {
    node.grad += g;
  }
}

void Tape::backward(Var output) {
  if (output.rows() != 1 || output.cols() != 1) {
    throw ShapeError("backward needs a 1x1 output, got " + shape_string(output.value()));
  }
  for (Node& node : nodes_) node.grad.resize(0, 0);
  Node& out = nodes_[output.id_];
  if (!out.requires_grad) return;
  out.grad = Matrix::Ones(1, 1);

  for (std::size_t i = output.id_ + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.grad.size() == 0) continue;
    // Parents have smaller ids, so node.grad is final and is never written
    // while its backprop runs.
    if (node.backprop) node.backprop(*this, node.grad);
    if (node.param != nullptr) {
      require_finite(node.grad, "gradient of " + node.param->name);
      node.param->grad += node.grad;
    }
  }
}

namespace {

void require_same_shape(Var a, Var b, std::string_view op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.value()) +
                     " vs " + shape_string(b.value()));
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: shape mismatch " + shape_string(a.value()) + " vs " +
                     shape_string(b.value()));
  }
  Matrix out = a.value() * b.value();
  return a.tape().record(std::move(out), {a, b},
                         [a, b](Tape& t, const Matrix& g) {
                           if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
                           if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
                         },
                         "matmul");
}

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_row: shape mismatch " + shape_string(a.value()) + " vs " +
                     shape_string(row.value()));
  }
  Matrix out = a.value().rowwise() + row.value().row(0);
  return a.tape().record(std::move(out), {a, row},
                         [a, row](Tape& t, const Matrix& g) {
                           t.accumulate(a, g);
                           if (t.requires_grad(row)) t.accumulate(row, g.colwise().sum());
                         },
                         "add_row");
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Matrix out = a.value() + b.value();
  return a.tape().record(std::move(out), {a, b},
                         [a, b](Tape& t, const Matrix& g) {
                           t.accumulate(a, g);
                           t.accumulate(b, g);
                         },
                         "add");
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Matrix out = a.value() - b.value();
  return a.tape().record(std::move(out), {a, b},
                         [a, b](Tape& t, const Matrix& g) {
                           t.accumulate(a, g);
                           if (t.requires_grad(b)) t.accumulate(b, -g);
                         },
                         "sub");
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Matrix out = a.value().cwiseProduct(b.value());
  return a.tape().record(std::move(out), {a, b},
                         [a, b](Tape& t, const Matrix& g) {
                           if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(b.value()));
                           if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(a.value()));
                         },
                         "mul");
}

Var exp(Var a) {
  Matrix out = a.value().array().exp().matrix();
  Tape& tape = a.tape();
  const std::size_t self = tape.size();
  return tape.record(std::move(out), {a},
                     [a, self](Tape& t, const Matrix& g) {
                       t.accumulate(a, g.cwiseProduct(t.node(self).value()));
                     },
                     "exp");
}

Var leaky_relu(Var a, double slope) {
  if (!(slope >= 0.0 && slope < 1.0)) {
    throw std::invalid_argument("leaky_relu: slope must lie in [0, 1)");
  }
  Matrix out = a.value().unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
  return a.tape().record(std::move(out), {a},
                         [a, slope](Tape& t, const Matrix& g) {
                           Matrix d = a.value().unaryExpr(
                               [slope](double x) { return x > 0.0 ? 1.0 : slope; });
                           t.accumulate(a, g.cwiseProduct(d));
                         },
                         "leaky_relu");
}

Var atan(Var a) {
  Matrix out = a.value().unaryExpr([](double x) { return std::atan(x); });
  return a.tape().record(std::move(out), {a},
                         [a](Tape& t, const Matrix& g) {
                           Matrix d = a.value().unaryExpr(
                               [](double x) { return 1.0 / (1.0 + x * x); });
                           t.accumulate(a, g.cwiseProduct(d));
                         },
                         "atan");
}

Var scale(Var a, double factor) {
  Matrix out = a.value() * factor;
  return a.tape().record(std::move(out), {a},
                         [a, factor](Tape& t, const Matrix& g) { t.accumulate(a, g * factor); },
                         "scale");
}

Var square(Var a) {
  Matrix out = a.value().cwiseProduct(a.value());
  return a.tape().record(std::move(out), {a},
                         [a](Tape& t, const Matrix& g) {
                           t.accumulate(a, 2.0 * g.cwiseProduct(a.value()));
                         },
                         "square");
}

Var slice_cols(Var a, Index begin, Index count) {
  if (begin < 0 || count < 0 || begin + count > a.cols()) {
    throw ShapeError("slice_cols: columns [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " +
                     shape_string(a.value()));
  }
  Matrix out = a.value().middleCols(begin, count);
  return a.tape().record(std::move(out), {a},
                         [a, begin, count](Tape& t, const Matrix& g) {
                           Matrix ga = Matrix::Zero(a.rows(), a.cols());
                           ga.middleCols(begin, count) = g;
                           t.accumulate(a, ga);
                         },
                         "slice_cols");
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row count mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index offset = 0;
  for (const Var& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return parts.front().tape().record(
      std::move(out), parts,
      [saved](Tape& t, const Matrix& g) {
        Index at = 0;
        for (const Var& p : saved) {
          if (t.requires_grad(p)) t.accumulate(p, g.middleCols(at, p.cols()));
          at += p.cols();
        }
      },
      "concat_cols");
}

Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

Var permute_cols(Var a, std::span<const int> perm) {
  if (static_cast<Index>(perm.size()) != a.cols()) {
    throw ShapeError("permute_cols: permutation size does not match " + shape_string(a.value()));
  }
  std::vector<bool> seen(perm.size(), false);
  for (int c : perm) {
    if (c < 0 || c >= a.cols() || seen[static_cast<std::size_t>(c)]) {
      throw ShapeError("permute_cols: not a permutation of the columns");
    }
    seen[static_cast<std::size_t>(c)] = true;
  }
  Matrix out(a.rows(), a.cols());
  for (Index j = 0; j < a.cols(); ++j) out.col(j) = a.value().col(perm[static_cast<std::size_t>(j)]);
  std::vector<int> p(perm.begin(), perm.end());
  return a.tape().record(std::move(out), {a},
                         [a, p = std::move(p)](Tape& t, const Matrix& g) {
                           Matrix ga(g.rows(), g.cols());
                           for (Index j = 0; j < g.cols(); ++j) {
                             ga.col(p[static_cast<std::size_t>(j)]) = g.col(j);
                           }
                           t.accumulate(a, ga);
                         },
                         "permute_cols");
}

Var row_sum(Var a) {
  Matrix out = a.value().rowwise().sum();
  return a.tape().record(std::move(out), {a},
                         [a](Tape& t, const Matrix& g) {
                           Matrix ga = g.col(0).replicate(1, a.cols());
                           t.accumulate(a, ga);
                         },
                         "row_sum");
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape().record(std::move(out), {a},
                         [a](Tape& t, const Matrix& g) {
                           t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
                         },
                         "sum");
}

Var mean(Var a) {
  if (a.value().size() == 0) throw ShapeError("mean: empty operand");
  const double n = static_cast<double>(a.value().size());
  Matrix out(1, 1);
  out(0, 0) = a.value().sum() / n;
  return a.tape().record(std::move(out), {a},
                         [a, n](Tape& t, const Matrix& g) {
                           t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0) / n));
                         },
                         "mean");
}

Var stop_gradient(Var a) { return a.tape().constant(a.value()); }

}  // namespace inn::ad

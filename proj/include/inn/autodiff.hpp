// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "inn/matrix.hpp"

namespace inn::ad {

/// Trainable matrix with its gradient accumulator and Adam moments.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Matrix init);

  void zero_grad() { grad.setZero(); }

  std::string name;
  Matrix value;
  Matrix grad;
  Matrix m;
  Matrix v;
  std::int64_t step = 0;
};

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
/// tape is alive.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode differentiation tape over dense matrices.
///
/// Nodes are appended in evaluation order, so the node vector is already a
/// topological order and backward() is a single reverse sweep. A tape built
/// with gradients disabled records values only; bind() then yields constants.
class Tape {
 public:
  /// Propagates the gradient of a node to its parents through accumulate().
  using Backprop = std::function<void(Tape&, const Matrix& out_grad)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var constant(Matrix value);
  /// Differentiable leaf that is not tied to a Parameter.
  Var variable(Matrix value);
  Var bind(Parameter& param);
  Var bind(const Parameter& param) { return constant(param.value); }

  /// Appends a node computed from `parents`. The value must be finite.
  Var record(Matrix value, std::initializer_list<Var> parents, Backprop backprop,
             std::string_view op);
  Var record(Matrix value, std::span<const Var> parents, Backprop backprop,
             std::string_view op);

  /// Sweeps gradients from a 1x1 output back to every reachable node and adds
  /// the leaf gradients into their Parameter accumulators.
  void backward(Var output);

  const Matrix& value(Var v) const { return nodes_[v.id_].value; }
  /// Gradient of the last backward output with respect to `v` (zeros when
  /// `v` was unreachable).
  Matrix grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id_].requires_grad; }

  /// Adds `g` into the gradient of `target`; no-op for constants.
  void accumulate(Var target, const Matrix& g);

  std::size_t size() const { return nodes_.size(); }
  /// Handle for the node with the given id (ids are assigned in order).
  Var node(std::size_t id) { return Var(this, id); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;  // empty until reached during backward
    Backprop backprop;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
  bool grad_enabled_;
};

inline const Matrix& Var::value() const { return tape_->value(*this); }

// Primitive operations. Every op checks operand shapes and throws ShapeError on
// mismatch, and throws NumericError when its value is not finite.

Var matmul(Var a, Var b);
/// Adds a 1 x cols row vector to every row of `a`.
Var add_row(Var a, Var row);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var exp(Var a);
/// max(a, 0) + slope * min(a, 0); slope in [0, 1).
Var leaky_relu(Var a, double slope);
Var atan(Var a);
Var scale(Var a, double factor);
Var square(Var a);
Var slice_cols(Var a, Index begin, Index count);
Var concat_cols(std::span<const Var> parts);
Var concat_cols(std::initializer_list<Var> parts);
/// Output column j is input column perm[j].
Var permute_cols(Var a, std::span<const int> perm);
/// rows x 1 vector of per-row sums.
Var row_sum(Var a);
Var sum(Var a);
Var mean(Var a);
/// Same value, treated as a constant by backward().
Var stop_gradient(Var a);

}  // namespace inn::ad

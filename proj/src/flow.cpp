// SPDX-License-Identifier: Apache-2.0
#include "inn/flow.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace inn {

double clamp_s(double raw, double c) {
  return c * (2.0 / std::numbers::pi) * std::atan(raw / c);
}

Matrix clamp_s(const Matrix& raw, double c) {
  return raw.unaryExpr([c](double r) { return clamp_s(r, c); });
}

ad::Var clamp_s(ad::Var raw, double c) {
  return ad::scale(ad::atan(ad::scale(raw, 1.0 / c)), c * (2.0 / std::numbers::pi));
}

// --- CouplingBlock -----------------------------------------------------------

CouplingBlock::CouplingBlock(const std::string& name, int width, std::span<const int> hidden,
                             double slope, double clamp, Rng& rng)
    : width_(width), split_((width + 1) / 2), clamp_(clamp) {
  if (width < 2) throw std::invalid_argument("coupling block width must be at least 2");
  if (!(clamp > 0.0)) throw std::invalid_argument("clamp constant must be positive");
  const int rest = width - split_;
  first_ = Subnet(name + ".first", rest, hidden, 2 * split_, slope, rng);
  second_ = Subnet(name + ".second", split_, hidden, 2 * rest, slope, rng);
}

template <class Self>
CouplingResult CouplingBlock::run_forward(Self& self, ad::Tape& tape, ad::Var u) {
  if (u.cols() != self.width_) {
    throw ShapeError("coupling block expects width " + std::to_string(self.width_) + ", got " +
                     std::to_string(u.cols()));
  }
  const int a = self.split_;
  const int b = self.width_ - a;
  ad::Var u1 = ad::slice_cols(u, 0, a);
  ad::Var u2 = ad::slice_cols(u, a, b);

  ad::Var st2 = self.first_.forward(tape, u2);
  ad::Var s2 = clamp_s(ad::slice_cols(st2, 0, a), self.clamp_);
  ad::Var t2 = ad::slice_cols(st2, a, a);
  ad::Var v1 = ad::add(ad::mul(u1, ad::exp(s2)), t2);

  ad::Var st1 = self.second_.forward(tape, v1);
  ad::Var s1 = clamp_s(ad::slice_cols(st1, 0, b), self.clamp_);
  ad::Var t1 = ad::slice_cols(st1, b, b);
  ad::Var v2 = ad::add(ad::mul(u2, ad::exp(s1)), t1);

  return {ad::concat_cols({v1, v2}), ad::add(ad::row_sum(s2), ad::row_sum(s1))};
}

template <class Self>
ad::Var CouplingBlock::run_inverse(Self& self, ad::Tape& tape, ad::Var v) {
  if (v.cols() != self.width_) {
    throw ShapeError("coupling block expects width " + std::to_string(self.width_) + ", got " +
                     std::to_string(v.cols()));
  }
  const int a = self.split_;
  const int b = self.width_ - a;
  ad::Var v1 = ad::slice_cols(v, 0, a);
  ad::Var v2 = ad::slice_cols(v, a, b);

  ad::Var st1 = self.second_.forward(tape, v1);
  ad::Var s1 = clamp_s(ad::slice_cols(st1, 0, b), self.clamp_);
  ad::Var t1 = ad::slice_cols(st1, b, b);
  ad::Var u2 = ad::mul(ad::sub(v2, t1), ad::exp(ad::scale(s1, -1.0)));

  ad::Var st2 = self.first_.forward(tape, u2);
  ad::Var s2 = clamp_s(ad::slice_cols(st2, 0, a), self.clamp_);
  ad::Var t2 = ad::slice_cols(st2, a, a);
  ad::Var u1 = ad::mul(ad::sub(v1, t2), ad::exp(ad::scale(s2, -1.0)));

  return ad::concat_cols({u1, u2});
}

template CouplingResult CouplingBlock::run_forward<CouplingBlock>(CouplingBlock&, ad::Tape&,
                                                                 ad::Var);
template CouplingResult CouplingBlock::run_forward<const CouplingBlock>(const CouplingBlock&,
                                                                       ad::Tape&, ad::Var);
template ad::Var CouplingBlock::run_inverse<CouplingBlock>(CouplingBlock&, ad::Tape&, ad::Var);
template ad::Var CouplingBlock::run_inverse<const CouplingBlock>(const CouplingBlock&, ad::Tape&,
                                                                 ad::Var);

std::pair<Matrix, Vector> CouplingBlock::forward(const Matrix& u) const {
  ad::Tape tape(false);
  CouplingResult r = forward(tape, tape.constant(u));
  return {r.v.value(), r.logdet.value().col(0)};
}

Matrix CouplingBlock::inverse(const Matrix& v) const {
  ad::Tape tape(false);
  return inverse(tape, tape.constant(v)).value();
}

void CouplingBlock::collect_parameters(std::vector<ad::Parameter*>& out) {
  first_.collect_parameters(out);
  second_.collect_parameters(out);
}

void CouplingBlock::collect_parameters(std::vector<const ad::Parameter*>& out) const {
  first_.collect_parameters(out);
  second_.collect_parameters(out);
}

// --- PermutationLayer --------------------------------------------------------

PermutationLayer::PermutationLayer(std::vector<int> perm)
    : perm_(std::move(perm)), inverse_(perm_.size(), -1) {
  const int n = static_cast<int>(perm_.size());
  for (int j = 0; j < n; ++j) {
    const int src = perm_[static_cast<std::size_t>(j)];
    if (src < 0 || src >= n || inverse_[static_cast<std::size_t>(src)] != -1) {
      throw std::invalid_argument("permutation is not a bijection");
    }
    inverse_[static_cast<std::size_t>(src)] = j;
  }
}

ad::Var PermutationLayer::forward(ad::Tape&, ad::Var u) const {
  return ad::permute_cols(u, perm_);
}

ad::Var PermutationLayer::inverse(ad::Tape&, ad::Var v) const {
  return ad::permute_cols(v, inverse_);
}

// --- InnModel ----------------------------------------------------------------

InnModel::InnModel(FlowDims dims, ModelConfig config)
    : dims_(dims), config_(std::move(config)) {
  if (dims_.x < 1 || dims_.y < 0 || dims_.z < 0) {
    throw std::invalid_argument("flow dimensions must be non-negative with D >= 1");
  }
  if (dims_.width < dims_.x || dims_.width < dims_.y + dims_.z) {
    throw std::invalid_argument("nominal width must be at least max(D, M + K)");
  }
  if (config_.blocks < 1) throw std::invalid_argument("a flow needs at least one block");
  Rng rng(config_.seed);
  for (int b = 0; b < config_.blocks; ++b) {
    if (b > 0) layers_.emplace_back(PermutationLayer(rng.permutation(dims_.width)));
    layers_.emplace_back(CouplingBlock("block" + std::to_string(b), dims_.width, config_.hidden,
                                       config_.slope, config_.clamp, rng));
  }
}

template <class Self>
TapedFlowOutput InnModel::run_forward(Self& self, ad::Tape& tape, ad::Var x_padded) {
  const FlowDims& d = self.dims_;
  if (x_padded.cols() != d.width) {
    throw ShapeError("flow expects padded width " + std::to_string(d.width) + ", got " +
                     std::to_string(x_padded.cols()));
  }
  ad::Var h = x_padded;
  ad::Var logdet = tape.constant(Matrix::Zero(x_padded.rows(), 1));
  for (auto& layer : self.layers_) {
    if (auto* block = std::get_if<CouplingBlock>(&layer)) {
      CouplingResult r = block->forward(tape, h);
      h = r.v;
      logdet = ad::add(logdet, r.logdet);
    } else {
      h = std::get<PermutationLayer>(layer).forward(tape, h);
    }
  }
  const int pad = d.width - d.y - d.z;
  return {h, ad::slice_cols(h, 0, d.y), ad::slice_cols(h, d.y, d.z),
          ad::slice_cols(h, d.y + d.z, pad), logdet};
}

template <class Self>
ad::Var InnModel::run_inverse(Self& self, ad::Tape& tape, ad::Var y, ad::Var z, ad::Var pad) {
  const FlowDims& d = self.dims_;
  if (y.cols() != d.y || z.cols() != d.z || pad.cols() != d.width - d.y - d.z) {
    throw ShapeError("flow inverse expects widths (" + std::to_string(d.y) + ", " +
                     std::to_string(d.z) + ", " + std::to_string(d.width - d.y - d.z) + ")");
  }
  if (y.rows() != z.rows() || y.rows() != pad.rows()) {
    throw ShapeError("flow inverse: row counts of y, z and pad differ");
  }
  ad::Var h = ad::concat_cols({y, z, pad});
  for (auto it = self.layers_.rbegin(); it != self.layers_.rend(); ++it) {
    if (auto* block = std::get_if<CouplingBlock>(&*it)) {
      h = block->inverse(tape, h);
    } else {
      h = std::get<PermutationLayer>(*it).inverse(tape, h);
    }
  }
  return h;
}

template TapedFlowOutput InnModel::run_forward<InnModel>(InnModel&, ad::Tape&, ad::Var);
template TapedFlowOutput InnModel::run_forward<const InnModel>(const InnModel&, ad::Tape&,
                                                               ad::Var);
template ad::Var InnModel::run_inverse<InnModel>(InnModel&, ad::Tape&, ad::Var, ad::Var, ad::Var);
template ad::Var InnModel::run_inverse<const InnModel>(const InnModel&, ad::Tape&, ad::Var,
                                                       ad::Var, ad::Var);

FlowOutput InnModel::forward(const Matrix& x_padded) const {
  ad::Tape tape(false);
  TapedFlowOutput out = forward(tape, tape.constant(x_padded));
  return {out.y.value(), out.z.value(), out.pad.value(), out.logdet.value().col(0)};
}

Matrix InnModel::inverse(const Matrix& y, const Matrix& z, const Matrix& pad) const {
  ad::Tape tape(false);
  return inverse(tape, tape.constant(y), tape.constant(z), tape.constant(pad)).value();
}

Matrix InnModel::pad_input(const Matrix& x) const {
  if (x.cols() != dims_.x) {
    throw ShapeError("expected " + std::to_string(dims_.x) + " x columns, got " +
                     std::to_string(x.cols()));
  }
  Matrix out = Matrix::Zero(x.rows(), dims_.width);
  out.leftCols(dims_.x) = x;
  return out;
}

Vector InnModel::log_conditional_density(const Matrix& x_padded) const {
  const FlowOutput out = forward(x_padded);
  const double norm = 0.5 * static_cast<double>(dims_.z) * std::log(2.0 * std::numbers::pi);
  Vector result(out.z.rows());
  for (Index i = 0; i < out.z.rows(); ++i) {
    result(i) = -0.5 * out.z.row(i).squaredNorm() - norm + out.logdet(i);
  }
  return result;
}

std::vector<ad::Parameter*> InnModel::parameters() {
  std::vector<ad::Parameter*> out;
  for (auto& layer : layers_) {
    if (auto* block = std::get_if<CouplingBlock>(&layer)) block->collect_parameters(out);
  }
  return out;
}

std::vector<const ad::Parameter*> InnModel::parameters() const {
  std::vector<const ad::Parameter*> out;
  for (const auto& layer : layers_) {
    if (const auto* block = std::get_if<CouplingBlock>(&layer)) block->collect_parameters(out);
  }
  return out;
}

void InnModel::append_permutation(std::vector<int> perm) {
  if (static_cast<int>(perm.size()) != dims_.width) {
    throw ShapeError("permutation size must equal the nominal width");
  }
  layers_.emplace_back(PermutationLayer(std::move(perm)));
}

}  // namespace inn

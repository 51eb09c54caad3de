// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "inn/autodiff.hpp"
#include "inn/subnet.hpp"

namespace inn {

/// Soft clamp c * (2/pi) * atan(raw / c). Odd, strictly increasing, range (-c, c).
double clamp_s(double raw, double c);
Matrix clamp_s(const Matrix& raw, double c);
ad::Var clamp_s(ad::Var raw, double c);

struct CouplingResult {
  ad::Var v;
  ad::Var logdet;  // rows x 1
};

/// Two complementary affine coupling layers.
///
/// The input u = [u1, u2] is split at ceil(width / 2). Each half owns one
/// subnet that emits its scale and shift side by side, [s | t]:
///   v1 = u1 * exp(s2(u2)) + t2(u2)
///   v2 = u2 * exp(s1(v1)) + t1(v1)
/// with every s passed through clamp_s. The log-Jacobian of the block is the
/// row sum of both clamped scales.
class CouplingBlock {
 public:
  CouplingBlock() = default;
  CouplingBlock(const std::string& name, int width, std::span<const int> hidden, double slope,
                double clamp, Rng& rng);

  CouplingResult forward(ad::Tape& tape, ad::Var u) { return run_forward(*this, tape, u); }
  CouplingResult forward(ad::Tape& tape, ad::Var u) const { return run_forward(*this, tape, u); }
  ad::Var inverse(ad::Tape& tape, ad::Var v) { return run_inverse(*this, tape, v); }
  ad::Var inverse(ad::Tape& tape, ad::Var v) const { return run_inverse(*this, tape, v); }

  /// Tape-free evaluation: (v, per-row logdet).
  std::pair<Matrix, Vector> forward(const Matrix& u) const;
  Matrix inverse(const Matrix& v) const;

  int width() const { return width_; }
  int split() const { return split_; }
  double clamp() const { return clamp_; }

  /// Conditioned on u2, produces [s2 | t2] for u1.
  Subnet& first_net() { return first_; }
  /// Conditioned on v1, produces [s1 | t1] for u2.
  Subnet& second_net() { return second_; }

  void collect_parameters(std::vector<ad::Parameter*>& out);
  void collect_parameters(std::vector<const ad::Parameter*>& out) const;

 private:
  template <class Self>
  static CouplingResult run_forward(Self& self, ad::Tape& tape, ad::Var u);
  template <class Self>
  static ad::Var run_inverse(Self& self, ad::Tape& tape, ad::Var v);

  int width_ = 0;
  int split_ = 0;
  double clamp_ = 2.0;
  Subnet first_;
  Subnet second_;
};

/// Fixed column shuffle. Output column j is input column perm[j].
class PermutationLayer {
 public:
  PermutationLayer() = default;
  explicit PermutationLayer(std::vector<int> perm);

  ad::Var forward(ad::Tape& tape, ad::Var u) const;
  ad::Var inverse(ad::Tape& tape, ad::Var v) const;

  const std::vector<int>& perm() const { return perm_; }
  const std::vector<int>& inverse_perm() const { return inverse_; }

 private:
  std::vector<int> perm_;
  std::vector<int> inverse_;
};

/// Intrinsic and padded widths of a flow.
struct FlowDims {
  int x = 0;      // D
  int y = 0;      // M
  int z = 0;      // K
  int width = 0;  // W, the nominal padded width
};

struct ModelConfig {
  int blocks = 3;
  std::vector<int> hidden{64, 64};
  double slope = 0.01;
  double clamp = 2.0;
  std::uint64_t seed = 0;
};

/// Tape-free forward result, split by the output layout [y | z | pad].
struct FlowOutput {
  Matrix y;
  Matrix z;
  Matrix pad;
  Vector logdet;
};

struct TapedFlowOutput {
  ad::Var full;
  ad::Var y;
  ad::Var z;
  ad::Var pad;
  ad::Var logdet;  // rows x 1
};

/// Invertible network: coupling blocks with a fixed random permutation before
/// every block after the first.
///
/// Input layout is [x | x_pad] (widths D and W - D); output layout is
/// [y | z | pad] (widths M, K and W - M - K).
class InnModel {
 public:
  using Layer = std::variant<CouplingBlock, PermutationLayer>;

  InnModel(FlowDims dims, ModelConfig config);

  const FlowDims& dims() const { return dims_; }
  const ModelConfig& config() const { return config_; }
  int output_pad_width() const { return dims_.width - dims_.y - dims_.z; }
  int input_pad_width() const { return dims_.width - dims_.x; }

  TapedFlowOutput forward(ad::Tape& tape, ad::Var x_padded) {
    return run_forward(*this, tape, x_padded);
  }
  TapedFlowOutput forward(ad::Tape& tape, ad::Var x_padded) const {
    return run_forward(*this, tape, x_padded);
  }
  FlowOutput forward(const Matrix& x_padded) const;

  /// Full W-wide reconstruction; callers strip to the first D columns for x.
  ad::Var inverse(ad::Tape& tape, ad::Var y, ad::Var z, ad::Var pad) {
    return run_inverse(*this, tape, y, z, pad);
  }
  ad::Var inverse(ad::Tape& tape, ad::Var y, ad::Var z, ad::Var pad) const {
    return run_inverse(*this, tape, y, z, pad);
  }
  Matrix inverse(const Matrix& y, const Matrix& z, const Matrix& pad) const;

  /// Appends zero columns up to the nominal width.
  Matrix pad_input(const Matrix& x) const;

  /// log N(f_z(x); 0, I) + forward log-Jacobian, on the padded space.
  Vector log_conditional_density(const Matrix& x_padded) const;

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }
  void append_permutation(std::vector<int> perm);

 private:
  template <class Self>
  static TapedFlowOutput run_forward(Self& self, ad::Tape& tape, ad::Var x_padded);
  template <class Self>
  static ad::Var run_inverse(Self& self, ad::Tape& tape, ad::Var y, ad::Var z, ad::Var pad);

  FlowDims dims_;
  ModelConfig config_;
  std::vector<Layer> layers_;
};

}  // namespace inn

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "inn/autodiff.hpp"
#include "inn/rng.hpp"

namespace inn {

/// Fully connected network used for the coupling coefficients: affine layers
/// separated by leaky rectifiers, with a plain affine output layer.
class Subnet {
 public:
  Subnet() = default;
  /// Weights are Glorot-uniform, biases zero.
  Subnet(const std::string& name, int input_width, std::span<const int> hidden,
         int output_width, double slope, Rng& rng);

  ad::Var forward(ad::Tape& tape, ad::Var input) { return run(*this, tape, input); }
  ad::Var forward(ad::Tape& tape, ad::Var input) const { return run(*this, tape, input); }

  int input_width() const;
  int output_width() const;
  std::size_t layer_count() const { return weights_.size(); }
  double slope() const { return slope_; }

  /// Weight matrices are input_width x output_width; y = x W + b.
  ad::Parameter& weight(std::size_t layer) { return weights_[layer]; }
  ad::Parameter& bias(std::size_t layer) { return biases_[layer]; }
  const ad::Parameter& weight(std::size_t layer) const { return weights_[layer]; }
  const ad::Parameter& bias(std::size_t layer) const { return biases_[layer]; }

  void collect_parameters(std::vector<ad::Parameter*>& out);
  void collect_parameters(std::vector<const ad::Parameter*>& out) const;

 private:
  template <class Self>
  static ad::Var run(Self& self, ad::Tape& tape, ad::Var input);

  std::vector<ad::Parameter> weights_;
  std::vector<ad::Parameter> biases_;
  double slope_ = 0.01;
};

}  // namespace inn

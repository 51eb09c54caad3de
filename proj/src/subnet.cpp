// SPDX-License-Identifier: Apache-2.0
#include "inn/subnet.hpp"

#include <cmath>

namespace inn {

Subnet::Subnet(const std::string& name, int input_width, std::span<const int> hidden,
               int output_width, double slope, Rng& rng)
    : slope_(slope) {
  if (!(slope >= 0.0 && slope < 1.0)) {
    throw std::invalid_argument("subnet slope must lie in [0, 1)");
  }
  std::vector<int> widths{input_width};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(output_width);
  for (int w : widths) {
    if (w <= 0) throw std::invalid_argument("subnet widths must be positive");
  }
  weights_.reserve(widths.size() - 1);
  biases_.reserve(widths.size() - 1);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int fan_in = widths[l];
    const int fan_out = widths[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_in, fan_out);
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = limit * (2.0 * rng.uniform() - 1.0);
    const std::string prefix = name + ".layer" + std::to_string(l);
    weights_.emplace_back(prefix + ".weight", std::move(w));
    biases_.emplace_back(prefix + ".bias", Matrix::Zero(1, fan_out));
  }
}

int Subnet::input_width() const {
  return weights_.empty() ? 0 : static_cast<int>(weights_.front().value.rows());
}

int Subnet::output_width() const {
  return weights_.empty() ? 0 : static_cast<int>(weights_.back().value.cols());
}

template <class Self>
ad::Var Subnet::run(Self& self, ad::Tape& tape, ad::Var input) {
  if (input.cols() != self.input_width()) {
    throw ShapeError("subnet expects " + std::to_string(self.input_width()) +
                     " input columns, got " + std::to_string(input.cols()));
  }
  ad::Var h = input;
  const std::size_t layers = self.weights_.size();
  for (std::size_t l = 0; l < layers; ++l) {
    h = ad::add_row(ad::matmul(h, tape.bind(self.weights_[l])), tape.bind(self.biases_[l]));
    if (l + 1 < layers) h = ad::leaky_relu(h, self.slope_);
  }
  return h;
}

template ad::Var Subnet::run<Subnet>(Subnet&, ad::Tape&, ad::Var);
template ad::Var Subnet::run<const Subnet>(const Subnet&, ad::Tape&, ad::Var);

void Subnet::collect_parameters(std::vector<ad::Parameter*>& out) {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
}

void Subnet::collect_parameters(std::vector<const ad::Parameter*>& out) const {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
}

}  // namespace inn

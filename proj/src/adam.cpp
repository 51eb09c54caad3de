// SPDX-License-Identifier: Apache-2.0
#include "inn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace inn::ad {

void adam_step(std::span<Parameter* const> params, double lr, const AdamConfig& config) {
  if (!(lr > 0.0)) throw std::invalid_argument("adam_step: learning rate must be positive");
  for (Parameter* p : params) {
    require_finite(p->grad, "gradient of " + p->name);
    p->step += 1;
    const auto t = static_cast<double>(p->step);
    p->m = config.beta1 * p->m + (1.0 - config.beta1) * p->grad;
    p->v = config.beta2 * p->v + (1.0 - config.beta2) * p->grad.cwiseProduct(p->grad);
    const double m_corr = 1.0 - std::pow(config.beta1, t);
    const double v_corr = 1.0 - std::pow(config.beta2, t);
    const double eps = config.epsilon;
    p->value.array() -=
        lr * (p->m.array() / m_corr) / ((p->v.array() / v_corr).sqrt() + eps);
    require_finite(p->value, "Adam update of " + p->name);
    p->zero_grad();
  }
}

}  // namespace inn::ad

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "inn/autodiff.hpp"

namespace inn::ad {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update from the accumulated gradients. Resets each
/// accumulator to zero and increments the per-parameter step count.
void adam_step(std::span<Parameter* const> params, double lr, const AdamConfig& config = {});

}  // namespace inn::ad

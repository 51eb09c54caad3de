// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <string_view>

#include "inn/autodiff.hpp"

namespace inn {

enum class KernelKind {
  kInverseMultiquadratic,  // 1 / (1 + |d/h|^2)
  kMultiquadratic,         // -sqrt(1 + |d/h|^2)
};

struct KernelSpec {
  KernelKind kind = KernelKind::kInverseMultiquadratic;
  double h = 1.0;
};

std::string_view kernel_name(KernelKind kind);
/// Accepts "inverse_multiquadratic" and "multiquadratic".
KernelKind parse_kernel_kind(std::string_view name);

double kernel_eval(const KernelSpec& spec, std::span<const double> a, std::span<const double> b);

/// Biased (V-statistic) squared MMD between the row sets of x and y, all
/// pairs including the diagonals. Differentiable in both arguments.
///
/// Symmetric bit for bit: the cross term is always evaluated with the
/// lexicographically smaller operand first.
ad::Var mmd2(ad::Var x, ad::Var y, const KernelSpec& spec);
double mmd2(const Matrix& x, const Matrix& y, const KernelSpec& spec);

}  // namespace inn

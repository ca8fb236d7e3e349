#pragma once

#include <functional>
#include <string>

#include "khgt/numerics/tape.hpp"

namespace khgt::numerics {

/// Builds a scalar on `tape` from `params`, registering each parameter it
/// wants differentiated via Tape::parameter. Must be deterministic.
using ModelFn = std::function<Var(Tape& tape, const TensorMap& params)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t entries_checked = 0;
};

/// |a - n| / max(1e-8, |a| + |n|), the per-entry comparison used below.
double relative_error(double analytic, double numeric);

/// Compares reverse-mode gradients against central differences
/// (f(p+eps) - f(p-eps)) / (2 eps) for every scalar parameter entry.
GradCheckResult grad_check(const ModelFn& fn, const TensorMap& params, double eps);

/// Same comparison against a caller-supplied analytic gradient.
GradCheckResult grad_check_against(const ModelFn& fn, const TensorMap& params, const GradientMap& analytic,
                                   double eps);

/// Value of `fn` without differentiation.
double evaluate_scalar(const ModelFn& fn, const TensorMap& params);

/// Analytic gradient of `fn`.
GradientMap gradient(const ModelFn& fn, const TensorMap& params);

}  // namespace khgt::numerics

#include "khgt/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "khgt/errors.hpp"

namespace khgt::numerics {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

double evaluate_scalar(const ModelFn& fn, const TensorMap& params) {
  Tape tape;
  const Var out = fn(tape, params);
  if (out.value().size() != 1) throw ContractError("model function must return a scalar");
  return out.value()[0];
}

GradientMap gradient(const ModelFn& fn, const TensorMap& params) {
  Tape tape;
  return tape.backward(fn(tape, params));
}

GradCheckResult grad_check_against(const ModelFn& fn, const TensorMap& params, const GradientMap& analytic,
                                   double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw ContractError("grad_check eps must lie in [1e-7, 1e-3]");
  GradCheckResult result;
  TensorMap probe = params;
  for (auto& [name, tensor] : probe) {
    const auto found = analytic.find(name);
    if (found == analytic.end()) throw ContractError("no analytic gradient for parameter '" + name + "'");
    if (found->second.shape() != tensor.shape()) throw DimensionError("gradient shape mismatch for '" + name + "'");
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double saved = tensor[i];
      tensor[i] = saved + eps;
      const double up = evaluate_scalar(fn, probe);
      tensor[i] = saved - eps;
      const double down = evaluate_scalar(fn, probe);
      tensor[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("non-finite model output while perturbing " + name + "[" + std::to_string(i) + "]");
      }
      const double numeric = (up - down) / (2.0 * eps);
      const double err = relative_error(found->second[i], numeric);
      ++result.entries_checked;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

GradCheckResult grad_check(const ModelFn& fn, const TensorMap& params, double eps) {
  return grad_check_against(fn, params, gradient(fn, params), eps);
}

}  // namespace khgt::numerics

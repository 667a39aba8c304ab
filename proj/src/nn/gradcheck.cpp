#include "drive/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace drive::nn {

template <typename T>
GradCheckResult grad_check(const std::function<Var<T>()>& loss_fn, const ParamList<T>& params, double eps) {
  zero_grad(params);
  {
    const auto loss = loss_fn();
    backward(loss);
  }
  GradCheckResult result;
  for (const auto& p : params) {
    auto var = p.var;
    const NdArray<T> analytic = var.grad();
    auto& values = var.value_mut();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const T original = values[i];
      double plus, minus;
      {
        NoGradGuard guard;
        values[i] = static_cast<T>(original + eps);
        plus = static_cast<double>(loss_fn().item());
        values[i] = static_cast<T>(original - eps);
        minus = static_cast<double>(loss_fn().item());
      }
      values[i] = original;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = static_cast<double>(analytic[i]);
      const double denom = std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
      const double err = std::abs(a - numeric) / denom;
      ++result.checked;
      if (err > result.max_rel_error || !std::isfinite(err)) {
        result.max_rel_error = std::isfinite(err) ? err : INFINITY;
        result.worst_param = p.name;
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  zero_grad(params);
  return result;
}

template GradCheckResult grad_check(const std::function<Var<float>()>&, const ParamList<float>&, double);
template GradCheckResult grad_check(const std::function<Var<double>()>&, const ParamList<double>&, double);

}  // namespace drive::nn

#pragma once

#include <functional>
#include <string>

#include "drive/nn/autograd.hpp"

namespace drive::nn {

// Gradients smaller than this are compared in absolute terms.
inline constexpr double kGradCheckFloor = 1e-3;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

// Compares reverse-mode gradients of `loss_fn` w.r.t. every element of
// `params` against central differences with step `eps`. The error per
// element is |a − n| / max(|a|, |n|, kGradCheckFloor).
template <typename T>
GradCheckResult grad_check(const std::function<Var<T>()>& loss_fn, const ParamList<T>& params,
                           double eps = 1e-6);

}  // namespace drive::nn

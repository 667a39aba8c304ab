#pragma once

#include "drive/nn/autograd.hpp"

namespace drive::nn {

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kTanhEps = 1e-6;

template <typename T>
struct SquashedSample {
  Var<T> action;    // [n×k], strictly inside (−1, 1)
  Var<T> log_prob;  // [n×1]
};

// Reparameterised sample of a tanh-squashed diagonal Gaussian:
//   u = mean + exp(clamp(log_std)) ⊙ noise,  action = tanh(u)
//   log_prob = Σ_k [log N(u; mean, std) − log(1 − tanh²(u) + ε)]
// Inputs are [n×k] (or [k], treated as one row); noise is held constant.
template <typename T>
SquashedSample<T> tanh_gaussian(const Var<T>& mean, const Var<T>& log_std, const NdArray<T>& noise);

// Gaussian part only (no change-of-variables term), per row. Used by tests.
template <typename T>
NdArray<T> gaussian_log_density(const NdArray<T>& log_std, const NdArray<T>& noise);

}  // namespace drive::nn

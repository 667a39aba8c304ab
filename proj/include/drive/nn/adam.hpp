#pragma once

#include <cstdint>
#include <vector>

#include "drive/nn/autograd.hpp"

namespace drive::nn {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<NdArray<T>> m;  // one per parameter, same shape
  std::vector<NdArray<T>> v;
};

// Bias-corrected Adam update applied in place to `params`.
template <typename T>
void adam_step(const std::vector<NdArray<T>*>& params, const std::vector<const NdArray<T>*>& grads,
               AdamState<T>& state);

// Global L2 norm of the gradients of `params`.
template <typename T>
double grad_norm(const ParamList<T>& params);
// Rescales gradients so their global norm is at most `max_norm`; returns the pre-clip norm.
template <typename T>
double clip_grad_norm(const ParamList<T>& params, double max_norm);

template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(ParamList<T> params, AdamConfig config);

  void zero_grad() { nn::zero_grad(params_); }
  void step();

  const ParamList<T>& params() const { return params_; }
  AdamState<T>& state() { return state_; }
  const AdamState<T>& state() const { return state_; }

 private:
  ParamList<T> params_;
  AdamState<T> state_;
};

}  // namespace drive::nn

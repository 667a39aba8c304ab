#include "drive/nn/adam.hpp"

#include <cmath>

namespace drive::nn {

template <typename T>
void adam_step(const std::vector<NdArray<T>*>& params, const std::vector<const NdArray<T>*>& grads,
               AdamState<T>& state) {
  DRIVE_REQUIRE(params.size() == grads.size(), "adam_step: params/grads count mismatch");
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  DRIVE_REQUIRE(state.m.size() == params.size(), "adam_step: state does not match parameter list");
  ++state.step;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  const T b1 = static_cast<T>(c.beta1), b2 = static_cast<T>(c.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    const auto& g = *grads[i];
    DRIVE_REQUIRE(p.shape() == g.shape() && p.shape() == state.m[i].shape(),
                  "adam_step: shape mismatch for parameter " + std::to_string(i));
    using A = Eigen::Array<T, Eigen::Dynamic, 1>;
    Eigen::Map<A> pa(p.data(), static_cast<Eigen::Index>(p.size()));
    Eigen::Map<const A> ga(g.data(), static_cast<Eigen::Index>(g.size()));
    Eigen::Map<A> ma(state.m[i].data(), static_cast<Eigen::Index>(p.size()));
    Eigen::Map<A> va(state.v[i].data(), static_cast<Eigen::Index>(p.size()));
    ma = b1 * ma + (T{1} - b1) * ga;
    va = b2 * va + (T{1} - b2) * ga.square();
    pa -= static_cast<T>(c.lr / bc1) * ma / ((va / static_cast<T>(bc2)).sqrt() + static_cast<T>(c.eps));
  }
}

template <typename T>
double grad_norm(const ParamList<T>& params) {
  double s = 0.0;
  for (const auto& p : params) s += static_cast<double>(p.var.grad().matrix().squaredNorm());
  return std::sqrt(s);
}

template <typename T>
double clip_grad_norm(const ParamList<T>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const T factor = static_cast<T>(max_norm / norm);
    for (auto p : params) p.var.grad_mut().matrix() *= factor;
  }
  return norm;
}

template <typename T>
Adam<T>::Adam(ParamList<T> params, AdamConfig config) : params_(std::move(params)) {
  state_.config = config;
}

template <typename T>
void Adam<T>::step() {
  std::vector<NdArray<T>*> values;
  std::vector<const NdArray<T>*> grads;
  values.reserve(params_.size());
  grads.reserve(params_.size());
  for (auto& p : params_) {
    values.push_back(&p.var.value_mut());
    grads.push_back(&p.var.grad());
  }
  adam_step(values, grads, state_);
}

template void adam_step(const std::vector<NdArray<float>*>&, const std::vector<const NdArray<float>*>&,
                        AdamState<float>&);
template void adam_step(const std::vector<NdArray<double>*>&, const std::vector<const NdArray<double>*>&,
                        AdamState<double>&);
template double grad_norm(const ParamList<float>&);
template double grad_norm(const ParamList<double>&);
template double clip_grad_norm(const ParamList<float>&, double);
template double clip_grad_norm(const ParamList<double>&, double);
template class Adam<float>;
template class Adam<double>;

}  // namespace drive::nn

#include "drive/nn/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace drive::nn {

namespace {

template <typename T>
NdArray<T> as_rows(const NdArray<T>& a) {
  if (a.rank() == 2) return a;
  NdArray<T> out = a;
  out.reshape(Shape{1, a.size()});
  return out;
}

template <typename T>
Var<T> as_rows(const Var<T>& a) {
  return a.value().rank() == 2 ? a : reshape(a, Shape{1, a.size()});
}

}  // namespace

template <typename T>
SquashedSample<T> tanh_gaussian(const Var<T>& mean_in, const Var<T>& log_std_in, const NdArray<T>& noise_in) {
  const auto mean = as_rows(mean_in);
  const auto log_std_raw = as_rows(log_std_in);
  const auto noise = as_rows(noise_in);
  DRIVE_REQUIRE(mean.shape() == log_std_raw.shape() && mean.shape() == noise.shape(),
                "tanh_gaussian: mean, log_std and noise must share a shape");
  const auto log_std = clamp(log_std_raw, static_cast<T>(kLogStdMin), static_cast<T>(kLogStdMax));
  const auto u = add(mean, mul_const(exp(log_std), noise));
  const auto action = tanh(u);

  NdArray<T> base(noise.shape());
  const T half_log_2pi = static_cast<T>(0.5 * std::log(2.0 * std::numbers::pi));
  for (std::size_t i = 0; i < noise.size(); ++i) base[i] = T{-0.5} * noise[i] * noise[i] - half_log_2pi;
  // log N(u) = −½ noise² − log σ − ½ log 2π
  const auto gauss = sub(constant(std::move(base)), log_std);
  const auto correction = log(add_scalar(scale(square(action), T{-1}), static_cast<T>(1.0 + kTanhEps)));
  const auto log_prob = row_sum(sub(gauss, correction));
  return {action, log_prob};
}

template <typename T>
NdArray<T> gaussian_log_density(const NdArray<T>& log_std_in, const NdArray<T>& noise_in) {
  const auto log_std = as_rows(log_std_in);
  const auto noise = as_rows(noise_in);
  NdArray<T> out(Shape{noise.rows(), 1});
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  for (std::size_t r = 0; r < noise.rows(); ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k < noise.cols(); ++k) {
      const double ls = std::clamp(static_cast<double>(log_std.at(r, k)), kLogStdMin, kLogStdMax);
      const double n = noise.at(r, k);
      s += -0.5 * n * n - ls - half_log_2pi;
    }
    out[r] = static_cast<T>(s);
  }
  return out;
}

template SquashedSample<float> tanh_gaussian(const Var<float>&, const Var<float>&, const NdArray<float>&);
template SquashedSample<double> tanh_gaussian(const Var<double>&, const Var<double>&, const NdArray<double>&);
template NdArray<float> gaussian_log_density(const NdArray<float>&, const NdArray<float>&);
template NdArray<double> gaussian_log_density(const NdArray<double>&, const NdArray<double>&);

}  // namespace drive::nn

#include "drive/nn/layers.hpp"

#include <cmath>

namespace drive::nn {

namespace {

template <typename T>
NdArray<T> uniform(Shape shape, double bound, Rng& rng) {
  NdArray<T> a(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : a.values()) v = static_cast<T>(dist(rng));
  return a;
}

}  // namespace

template <typename T>
Var<T> activate(const Var<T>& x, Activation act) {
  switch (act) {
    case Activation::relu:
      return relu(x);
    case Activation::tanh:
      return tanh(x);
    case Activation::none:
      break;
  }
  return x;
}

template <typename T>
Var<T> dense_forward(const Var<T>& x, const Var<T>& w, const Var<T>& b, Activation act) {
  return activate(linear(x, w, b), act);
}

template <typename T>
LstmOutput<T> lstm_step(const Var<T>& x, const Var<T>& h, const Var<T>& c, const LstmParams<T>& p) {
  const std::size_t hidden = p.w_hh.value().dim(1);
  DRIVE_REQUIRE(h.value().cols() == hidden && c.value().cols() == hidden,
                "lstm_step: hidden/cell width must be " + std::to_string(hidden));
  DRIVE_REQUIRE(h.shape() == c.shape(), "lstm_step: hidden and cell shapes differ");
  DRIVE_REQUIRE(p.w_hh.value().dim(0) == 4 * hidden && p.w_ih.value().dim(0) == 4 * hidden,
                "lstm_step: gate weights must have 4H rows");
  // Bias is applied once through the input projection.
  const Var<T> zero_bias = constant(NdArray<T>(Shape{4 * hidden}));
  const auto gates = add(linear(x, p.w_ih, p.b), linear(h, p.w_hh, zero_bias));
  const auto i = sigmoid(slice_cols(gates, 0, hidden));
  const auto f = sigmoid(slice_cols(gates, hidden, hidden));
  const auto g = tanh(slice_cols(gates, 2 * hidden, hidden));
  const auto o = sigmoid(slice_cols(gates, 3 * hidden, hidden));
  const auto c_next = add(mul(f, c), mul(i, g));
  const auto h_next = mul(o, tanh(c_next));
  return {h_next, c_next};
}

template <typename T>
Var<T> global_pool(const Var<T>& volume, PoolMode mode) {
  return mode == PoolMode::max ? global_max_pool(volume) : global_avg_pool(volume);
}

template <typename T>
Dense<T>::Dense(std::size_t in, std::size_t out, Rng& rng) {
  // Glorot-uniform weights, zero bias.
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  weight = parameter(uniform<T>(Shape{out, in}, bound, rng));
  bias = parameter(NdArray<T>(Shape{out}));
}

template <typename T>
void Dense<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

template <typename T>
LstmCell<T>::LstmCell(std::size_t in, std::size_t hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  params.w_ih = parameter(uniform<T>(Shape{4 * hidden, in}, bound, rng));
  params.w_hh = parameter(uniform<T>(Shape{4 * hidden, hidden}, bound, rng));
  params.b = parameter(uniform<T>(Shape{4 * hidden}, bound, rng));
}

template <typename T>
void LstmCell<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  out.push_back({prefix + ".w_ih", params.w_ih});
  out.push_back({prefix + ".w_hh", params.w_hh});
  out.push_back({prefix + ".b", params.b});
}

template <typename T>
Conv2d<T>::Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride_,
                  std::size_t padding_, Rng& rng)
    : stride(stride_), padding(padding_) {
  // He-uniform for ReLU stacks.
  const double bound = std::sqrt(6.0 / static_cast<double>(in_ch * kernel * kernel));
  kernels = parameter(uniform<T>(Shape{out_ch, in_ch, kernel, kernel}, bound, rng));
  bias = parameter(NdArray<T>(Shape{out_ch}));
}

template <typename T>
void Conv2d<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  out.push_back({prefix + ".kernels", kernels});
  out.push_back({prefix + ".bias", bias});
}

template <typename T>
void copy_values(const ParamList<T>& src, const ParamList<T>& dst) {
  DRIVE_REQUIRE(src.size() == dst.size(), "copy_values: parameter count mismatch");
  for (std::size_t i = 0; i < src.size(); ++i) {
    DRIVE_REQUIRE(src[i].var.shape() == dst[i].var.shape(), "copy_values: shape mismatch at " + src[i].name);
    auto target = dst[i].var;
    target.value_mut() = src[i].var.value();
  }
}

#define DRIVE_INSTANTIATE_LAYERS(T)                                                             \
  template Var<T> activate<T>(const Var<T>&, Activation);                                       \
  template Var<T> dense_forward<T>(const Var<T>&, const Var<T>&, const Var<T>&, Activation);    \
  template LstmOutput<T> lstm_step<T>(const Var<T>&, const Var<T>&, const Var<T>&,              \
                                      const LstmParams<T>&);                                    \
  template Var<T> global_pool<T>(const Var<T>&, PoolMode);                                      \
  template class Dense<T>;                                                                      \
  template class LstmCell<T>;                                                                   \
  template class Conv2d<T>;                                                                     \
  template void copy_values<T>(const ParamList<T>&, const ParamList<T>&);

DRIVE_INSTANTIATE_LAYERS(float)
DRIVE_INSTANTIATE_LAYERS(double)

}  // namespace drive::nn

#pragma once

#include <random>
#include <string>

#include "drive/nn/autograd.hpp"

namespace drive::nn {

using Rng = std::mt19937_64;

enum class Activation { none, relu, tanh };
enum class PoolMode { max, avg };

template <typename T>
Var<T> activate(const Var<T>& x, Activation act);

// act(W x + b); x may be a single vector [n_in] or a batch [n×n_in].
template <typename T>
Var<T> dense_forward(const Var<T>& x, const Var<T>& w, const Var<T>& b, Activation act);

template <typename T>
struct LstmParams {
  Var<T> w_ih;  // [4H×in], gate order (input, forget, cell, output)
  Var<T> w_hh;  // [4H×H]
  Var<T> b;     // [4H]
};

template <typename T>
struct LstmOutput {
  Var<T> h;
  Var<T> c;
};

template <typename T>
LstmOutput<T> lstm_step(const Var<T>& x, const Var<T>& h, const Var<T>& c, const LstmParams<T>& p);

template <typename T>
Var<T> global_pool(const Var<T>& volume, PoolMode mode);

template <typename T>
class Dense {
 public:
  Dense() = default;
  Dense(std::size_t in, std::size_t out, Rng& rng);

  Var<T> operator()(const Var<T>& x, Activation act = Activation::none) const {
    return dense_forward(x, weight, bias, act);
  }
  void collect(ParamList<T>& out, const std::string& prefix) const;
  std::size_t in_features() const { return weight.value().dim(1); }
  std::size_t out_features() const { return weight.value().dim(0); }

  Var<T> weight;
  Var<T> bias;
};

template <typename T>
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(std::size_t in, std::size_t hidden, Rng& rng);

  LstmOutput<T> operator()(const Var<T>& x, const Var<T>& h, const Var<T>& c) const {
    return lstm_step(x, h, c, params);
  }
  void collect(ParamList<T>& out, const std::string& prefix) const;
  std::size_t hidden() const { return params.w_hh.value().dim(1); }

  LstmParams<T> params;
};

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride,
         std::size_t padding, Rng& rng);

  Var<T> operator()(const Var<T>& x) const { return conv2d(x, kernels, bias, stride, padding); }
  void collect(ParamList<T>& out, const std::string& prefix) const;

  Var<T> kernels;
  Var<T> bias;
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// Copies parameter values from `src` into `dst` (names and shapes must agree).
template <typename T>
void copy_values(const ParamList<T>& src, const ParamList<T>& dst);

}  // namespace drive::nn

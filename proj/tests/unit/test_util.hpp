#pragma once

#include <random>

#include "drive/nn/autograd.hpp"

namespace drive::testing {

template <typename T = double>
nn::NdArray<T> random_array(nn::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  nn::NdArray<T> a(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : a.values()) v = static_cast<T>(d(rng));
  return a;
}

template <typename T = double>
nn::NdArray<T> normal_array(nn::Shape shape, std::mt19937_64& rng, double stddev = 1.0) {
  nn::NdArray<T> a(std::move(shape));
  std::normal_distribution<double> d(0.0, stddev);
  for (auto& v : a.values()) v = static_cast<T>(d(rng));
  return a;
}

}  // namespace drive::testing

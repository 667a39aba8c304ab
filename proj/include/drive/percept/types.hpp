#pragma once

#include "drive/nn/ndarray.hpp"

namespace drive::percept {

// Normalized image coordinate; (0, 0) is the top-left corner.
struct FixationPoint {
  double x = 0.5;
  double y = 0.5;
  bool operator==(const FixationPoint&) const = default;
};

inline double squared_distance(const FixationPoint& a, const FixationPoint& b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// Centre of a rendered object in normalised coordinates. Synthetic episodes
// carry these so the oracle saliency model can be evaluated analytically.
struct ObjectMark {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const ObjectMark&) const = default;
};

// [3×H×W] in [0, 1]
struct Frame {
  nn::NdArray<float> pixels;
  int t = 0;

  std::size_t height() const { return pixels.dim(1); }
  std::size_t width() const { return pixels.dim(2); }
  bool operator==(const Frame&) const = default;
};

// [H'×W'] in [0, 1]
using AttentionMap = nn::NdArray<float>;
// [C×H'×W']
using FeatureVolume = nn::NdArray<float>;
// [2C]
using ObservationState = nn::NdArray<float>;

}  // namespace drive::percept

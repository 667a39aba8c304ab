#pragma once

#include <vector>

#include "drive/percept/types.hpp"

namespace drive::percept {

struct FoveationParams {
  int levels = 5;
  double falloff = 0.35;
  void validate() const;
};

// Level 0 is the input; level l ≥ 1 is blurred with σ = 2^(l−1) pixels.
using Pyramid = std::vector<nn::NdArray<float>>;

Pyramid build_pyramid(const Frame& frame, int levels);

// Separable Gaussian blur with edge renormalisation, so constant images are fixed points.
nn::NdArray<float> gaussian_blur(const nn::NdArray<float>& image, double sigma);

// Continuous pyramid coordinate for normalised eccentricity e.
double blend_level(double eccentricity, const FoveationParams& params);

// Eccentricity of pixel-space point (px, py) relative to the centre of the
// pixel containing `fixation`, normalised per axis by the frame extent.
double eccentricity(double px, double py, const FixationPoint& fixation, std::size_t height, std::size_t width);

Frame foveate(const Frame& frame, const FixationPoint& fixation, const FoveationParams& params);
Frame foveate(const Frame& frame, const Pyramid& pyramid, const FixationPoint& fixation,
              const FoveationParams& params);

void require_valid(const FixationPoint& p);

}  // namespace drive::percept

#include "drive/percept/foveate.hpp"

#include <algorithm>
#include <cmath>

namespace drive::percept {

void FoveationParams::validate() const {
  if (levels < 2) throw ConfigError("foveation levels must be >= 2");
  if (!(falloff > 0.0)) throw ConfigError("foveation falloff must be positive");
}

void require_valid(const FixationPoint& p) {
  DRIVE_REQUIRE(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0,
                "fixation (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ") outside [0,1]^2");
}

nn::NdArray<float> gaussian_blur(const nn::NdArray<float>& image, double sigma) {
  DRIVE_REQUIRE(image.rank() == 3, "gaussian_blur expects [C×H×W]");
  const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));

  std::vector<double> tmp(C * H * W);
  nn::NdArray<float> out(image.shape());
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        double s = 0.0, wsum = 0.0;
        for (int d = -radius; d <= radius; ++d) {
          const long xx = static_cast<long>(x) + d;
          if (xx < 0 || xx >= static_cast<long>(W)) continue;
          s += k[d + radius] * image.at(c, y, xx);
          wsum += k[d + radius];
        }
        tmp[(c * H + y) * W + x] = s / wsum;
      }
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        double s = 0.0, wsum = 0.0;
        for (int d = -radius; d <= radius; ++d) {
          const long yy = static_cast<long>(y) + d;
          if (yy < 0 || yy >= static_cast<long>(H)) continue;
          s += k[d + radius] * tmp[(c * H + yy) * W + x];
          wsum += k[d + radius];
        }
        out.at(c, y, x) = static_cast<float>(s / wsum);
      }
  }
  return out;
}

Pyramid build_pyramid(const Frame& frame, int levels) {
  DRIVE_REQUIRE(levels >= 2, "pyramid needs at least 2 levels");
  Pyramid p;
  p.push_back(frame.pixels);
  for (int l = 1; l < levels; ++l) p.push_back(gaussian_blur(frame.pixels, std::ldexp(1.0, l - 1)));
  return p;
}

double blend_level(double e, const FoveationParams& params) {
  if (!std::isfinite(params.falloff)) return 0.0;
  return std::clamp(e / params.falloff * (params.levels - 1), 0.0, static_cast<double>(params.levels - 1));
}

double eccentricity(double px, double py, const FixationPoint& f, std::size_t height, std::size_t width) {
  const double fx = std::min(std::floor(f.x * width), static_cast<double>(width - 1)) + 0.5;
  const double fy = std::min(std::floor(f.y * height), static_cast<double>(height - 1)) + 0.5;
  const double dx = (px - fx) / width, dy = (py - fy) / height;
  return std::sqrt(dx * dx + dy * dy);
}

Frame foveate(const Frame& frame, const Pyramid& pyramid, const FixationPoint& fixation,
              const FoveationParams& params) {
  params.validate();
  require_valid(fixation);
  DRIVE_REQUIRE(static_cast<int>(pyramid.size()) == params.levels, "pyramid depth does not match levels");
  const std::size_t C = frame.pixels.dim(0), H = frame.height(), W = frame.width();
  Frame out{nn::NdArray<float>(frame.pixels.shape()), frame.t};
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      const double b = blend_level(eccentricity(x + 0.5, y + 0.5, fixation, H, W), params);
      const int lo = std::min(static_cast<int>(b), params.levels - 1);
      const int hi = std::min(lo + 1, params.levels - 1);
      const float frac = static_cast<float>(b - lo);
      for (std::size_t c = 0; c < C; ++c) {
        const float a = pyramid[lo].at(c, y, x);
        out.pixels.at(c, y, x) = frac == 0.0f ? a : a + frac * (pyramid[hi].at(c, y, x) - a);
      }
    }
  return out;
}

Frame foveate(const Frame& frame, const FixationPoint& fixation, const FoveationParams& params) {
  params.validate();
  return foveate(frame, build_pyramid(frame, params.levels), fixation, params);
}

}  // namespace drive::percept

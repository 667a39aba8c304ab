#include "drive/percept/attention.hpp"

#include <algorithm>
#include <cmath>

namespace drive::percept {

double daf_rho(double score_prev, double m) {
  DRIVE_REQUIRE(m > 0.0 && m < 1.0, "DAF cap m must lie in (0, 1)");
  return std::min(m, score_prev);
}

AttentionMap daf_fuse(const AttentionMap& s_bu, const AttentionMap& s_td, double score_prev, double m) {
  DRIVE_REQUIRE(s_bu.shape() == s_td.shape(), "daf_fuse: extent mismatch " + nn::shape_str(s_bu.shape()) +
                                                  " vs " + nn::shape_str(s_td.shape()));
  const double rho = daf_rho(score_prev, m);
  if (rho == 0.0) return s_bu;
  AttentionMap out(s_bu.shape());
  const float r = static_cast<float>(rho);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const float v = (1.0f - r) * s_bu[i] + r * s_td[i];
    // Rounding can step just outside the hull of the two inputs.
    out[i] = std::clamp(v, std::min(s_bu[i], s_td[i]), std::max(s_bu[i], s_td[i]));
  }
  return out;
}

ObservationState build_state(const AttentionMap& s, const FeatureVolume& v) {
  DRIVE_REQUIRE(s.rank() == 2 && v.rank() == 3 && v.dim(1) == s.dim(0) && v.dim(2) == s.dim(1),
                "build_state: map " + nn::shape_str(s.shape()) + " does not match volume " +
                    nn::shape_str(v.shape()));
  const std::size_t C = v.dim(0), n = s.size();
  ObservationState out(nn::Shape{2 * C});
  for (std::size_t c = 0; c < C; ++c) {
    const float* vc = v.data() + c * n;
    double mx = -INFINITY, total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double m = static_cast<double>(s[i]) * vc[i];
      mx = std::max(mx, m);
      total += m;
    }
    out[c] = static_cast<float>(mx);
    out[C + c] = static_cast<float>(total / static_cast<double>(n));
  }
  for (std::size_t half = 0; half < 2; ++half) {
    double sq = 0.0;
    for (std::size_t c = 0; c < C; ++c) sq += static_cast<double>(out[half * C + c]) * out[half * C + c];
    if (sq == 0.0) continue;
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t c = 0; c < C; ++c) out[half * C + c] = static_cast<float>(out[half * C + c] * inv);
  }
  return out;
}

}  // namespace drive::percept

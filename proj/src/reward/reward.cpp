#include "drive/reward/reward.hpp"

#include <algorithm>
#include <cmath>

#include "drive/errors.hpp"

namespace drive::reward {

void RewardConfig::validate() const {
  if (!(a0 > 0.0 && a0 < 1.0)) throw ConfigError("a0 must lie in (0, 1)");
  if (!(eta > 0.0)) throw ConfigError("eta must be positive");
}

const percept::FixationPoint* EpisodeAnnotation::fixation_at(int t) const {
  if (t < 0 || static_cast<std::size_t>(t) >= fixations.size() || !fixations[t]) return nullptr;
  return &*fixations[t];
}

void EpisodeAnnotation::validate() const {
  DRIVE_REQUIRE(label == 0 || label == 1, "annotation label must be 0 or 1");
  DRIVE_REQUIRE(horizon > 0, "annotation horizon must be positive");
  if (label == 1)
    DRIVE_REQUIRE(t_a >= 1 && t_a <= horizon, "positive annotation needs 1 <= t_a <= L");
  else
    DRIVE_REQUIRE(t_a < 0, "negative annotation must not carry an onset");
  DRIVE_REQUIRE(fixations.empty() || fixations.size() == static_cast<std::size_t>(horizon),
                "fixation list must be empty or span the horizon");
  for (std::size_t t = 0; t < fixations.size(); ++t)
    if (fixations[t]) DRIVE_REQUIRE(label == 1 && static_cast<int>(t) > t_a, "fixation present before onset");
}

double earliness_weight(int t, int t_a) {
  DRIVE_REQUIRE(t_a >= 1, "earliness_weight requires t_a >= 1");
  DRIVE_REQUIRE(t >= 0, "earliness_weight requires t >= 0");
  const int lead = std::max(0, t_a - t);
  return std::expm1(static_cast<double>(lead)) / std::expm1(static_cast<double>(t_a));
}

double anticipation_reward(double score, const EpisodeAnnotation& ann, int t, const RewardConfig& cfg) {
  const int alarm = score > cfg.a0 ? 1 : 0;
  const double hit = alarm == ann.label ? 1.0 : 0.0;
  if (!ann.positive()) return hit;
  if (t > ann.t_a) return 0.0;
  return earliness_weight(t, ann.t_a) * hit;
}

double fixation_reward(const percept::FixationPoint& p_hat, const percept::FixationPoint* p_gt, int t, int t_a,
                       double eta) {
  if (!p_gt || t_a < 0 || t <= t_a) return 0.0;
  return std::exp(-percept::squared_distance(p_hat, *p_gt) / eta);
}

double step_reward(double score, const percept::FixationPoint* p_hat, const EpisodeAnnotation& ann, int t,
                   const RewardConfig& cfg) {
  double r = anticipation_reward(score, ann, t, cfg);
  if (p_hat) r += fixation_reward(*p_hat, ann.fixation_at(t), t, ann.t_a, cfg.eta);
  return r;
}

double exp_bce_weight(int t, int label, int t_a) {
  if (label != 1) return 1.0;
  return std::exp(-static_cast<double>(std::max(0, t_a - t)));
}

double exp_bce_loss(double score, int t, int label, int t_a) {
  const double s = std::clamp(score, kScoreEps, 1.0 - kScoreEps);
  if (label == 1) return -exp_bce_weight(t, label, t_a) * std::log(s);
  return -std::log(1.0 - s);
}

double fixation_reg_loss(const percept::FixationPoint& p_hat, const percept::FixationPoint* p_gt, int t, int t_a) {
  if (!p_gt || t_a < 0 || t <= t_a) return 0.0;
  return std::sqrt(percept::squared_distance(p_hat, *p_gt));
}

}  // namespace drive::reward

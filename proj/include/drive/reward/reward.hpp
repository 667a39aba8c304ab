#pragma once

#include <optional>
#include <vector>

#include "drive/percept/types.hpp"

namespace drive::reward {

inline constexpr double kScoreEps = 1e-7;

struct RewardConfig {
  double a0 = 0.5;   // alarm threshold
  double eta = 0.1;  // fixation kernel width
  void validate() const;
};

// Per-episode supervision. `fixations[t]` holds the ground-truth gaze for
// steps after onset on positive episodes and is empty otherwise.
struct EpisodeAnnotation {
  int label = 0;
  int t_a = -1;
  int horizon = 0;
  std::vector<std::optional<percept::FixationPoint>> fixations;

  bool positive() const { return label == 1; }
  const percept::FixationPoint* fixation_at(int t) const;
  void validate() const;
  bool operator==(const EpisodeAnnotation&) const = default;
};

// (e^{max(0, t_a − t)} − 1) / (e^{t_a} − 1)
double earliness_weight(int t, int t_a);

double anticipation_reward(double score, const EpisodeAnnotation& ann, int t, const RewardConfig& cfg);

double fixation_reward(const percept::FixationPoint& p_hat, const percept::FixationPoint* p_gt, int t, int t_a,
                       double eta);

// Total per-step reward r = r_A + r_F. `p_hat` is null when the fixation branch is disabled.
double step_reward(double score, const percept::FixationPoint* p_hat, const EpisodeAnnotation& ann, int t,
                   const RewardConfig& cfg);

// Positives: −e^{−max(0, t_a − t)} log(score); negatives: −log(1 − score).
double exp_bce_loss(double score, int t, int label, int t_a);
// Weight and target for the batched form used by the actor update.
double exp_bce_weight(int t, int label, int t_a);

double fixation_reg_loss(const percept::FixationPoint& p_hat, const percept::FixationPoint* p_gt, int t, int t_a);

}  // namespace drive::reward

#include <cmath>

#include "doctest.h"
#include "drive/reward/reward.hpp"

using namespace drive;
using namespace drive::reward;

namespace {

EpisodeAnnotation positive(int t_a, int L = 30) {
  EpisodeAnnotation a;
  a.label = 1;
  a.t_a = t_a;
  a.horizon = L;
  a.fixations.assign(L, std::nullopt);
  for (int t = t_a + 1; t < L; ++t) a.fixations[t] = percept::FixationPoint{0.4, 0.6};
  return a;
}

EpisodeAnnotation negative(int L = 30) {
  EpisodeAnnotation a;
  a.horizon = L;
  a.fixations.assign(L, std::nullopt);
  return a;
}

}  // namespace

TEST_CASE("earliness weight endpoints and worked value") {
  CHECK(earliness_weight(0, 5) == 1.0);
  CHECK(earliness_weight(5, 5) == 0.0);
  CHECK(earliness_weight(9, 5) == 0.0);
  CHECK(earliness_weight(3, 5) == doctest::Approx((std::exp(2.0) - 1) / (std::exp(5.0) - 1)).epsilon(1e-12));
  CHECK(earliness_weight(3, 5) == doctest::Approx(0.043345).epsilon(1e-5));
  CHECK_THROWS_AS(earliness_weight(0, 0), ContractError);
}

TEST_CASE("earliness weight is strictly decreasing up to onset") {
  for (int t_a = 1; t_a < 40; ++t_a)
    for (int t = 0; t < t_a; ++t) CHECK(earliness_weight(t, t_a) > earliness_weight(t + 1, t_a));
}

TEST_CASE("anticipation reward truth table") {
  const RewardConfig cfg;
  const auto pos = positive(20);
  const auto neg = negative();
  CHECK(anticipation_reward(0.7, pos, 0, cfg) == 1.0);  // TP
  CHECK(anticipation_reward(0.3, pos, 0, cfg) == 0.0);  // FN
  CHECK(anticipation_reward(0.7, neg, 4, cfg) == 0.0);  // FP
  CHECK(anticipation_reward(0.3, neg, 4, cfg) == 1.0);  // TN
  // Threshold is strict and post-onset steps earn nothing.
  CHECK(anticipation_reward(0.5, neg, 4, cfg) == 1.0);
  CHECK(anticipation_reward(0.5, pos, 0, cfg) == 0.0);
  CHECK(anticipation_reward(0.9, pos, 25, cfg) == 0.0);
  for (int t = 0; t <= 20; ++t) CHECK(anticipation_reward(0.3, pos, t, cfg) == 0.0);
}

TEST_CASE("fixation reward worked values") {
  const percept::FixationPoint gt{0.5, 0.5};
  CHECK(fixation_reward({0.5, 0.5}, &gt, 10, 10, 0.1) == 0.0);
  CHECK(fixation_reward({0.5, 0.5}, &gt, 11, 10, 0.1) == 1.0);
  CHECK(fixation_reward({0.7, 0.5}, &gt, 11, 10, 0.1) == doctest::Approx(std::exp(-0.4)).epsilon(1e-12));
  CHECK(fixation_reward({0.7, 0.5}, &gt, 11, 10, 0.1) == doctest::Approx(0.670320).epsilon(1e-6));
  CHECK(fixation_reward({0.7, 0.5}, nullptr, 11, 10, 0.1) == 0.0);
}

TEST_CASE("fixation reward decreases with distance") {
  const percept::FixationPoint gt{0.2, 0.3};
  double prev = 2.0;
  for (int k = 0; k <= 50; ++k) {
    const double r = fixation_reward({0.2 + 0.015 * k, 0.3}, &gt, 25, 20, 0.1);
    CHECK(r < prev);
    prev = r;
  }
}

TEST_CASE("step reward sums both terms") {
  const RewardConfig cfg;
  const auto pos = positive(20);
  const percept::FixationPoint p{0.4, 0.6};
  CHECK(step_reward(0.9, &p, pos, 25, cfg) == 1.0);
  CHECK(step_reward(0.9, &p, pos, 0, cfg) == 1.0);
  CHECK(step_reward(0.9, nullptr, pos, 25, cfg) == 0.0);
}

TEST_CASE("exponential BCE worked values") {
  CHECK(exp_bce_loss(0.5, 20, 1, 20) == doctest::Approx(0.693147).epsilon(1e-6));
  CHECK(exp_bce_loss(0.5, 18, 1, 20) == doctest::Approx(0.093808).epsilon(1e-5));
  CHECK(exp_bce_loss(1e-12, 3, 0, -1) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(std::isfinite(exp_bce_loss(0.0, 3, 1, 10)));
  CHECK(std::isfinite(exp_bce_loss(1.0, 3, 0, -1)));
}

TEST_CASE("exponential BCE derivative matches finite differences") {
  for (const int label : {0, 1})
    for (double s = 0.05; s < 0.96; s += 0.05) {
      const double h = 1e-6;
      const double numeric = (exp_bce_loss(s + h, 7, label, 12) - exp_bce_loss(s - h, 7, label, 12)) / (2 * h);
      const double w = exp_bce_weight(7, label, 12);
      const double analytic = label ? -w / s : 1.0 / (1.0 - s);
      CHECK(numeric == doctest::Approx(analytic).epsilon(1e-6));
    }
}

TEST_CASE("fixation regulariser worked values") {
  const percept::FixationPoint gt{0.1, 0.1};
  CHECK(fixation_reg_loss({0.4, 0.5}, &gt, 15, 10) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(fixation_reg_loss({0.4, 0.5}, &gt, 10, 10) == 0.0);
  CHECK(fixation_reg_loss({0.1, 0.1}, &gt, 15, 10) == 0.0);
}

TEST_CASE("annotation validation") {
  auto a = positive(20);
  CHECK_NOTHROW(a.validate());
  a.fixations[5] = percept::FixationPoint{0.5, 0.5};
  CHECK_THROWS_AS(a.validate(), ContractError);
  auto n = negative();
  n.t_a = 4;
  CHECK_THROWS_AS(n.validate(), ContractError);
}

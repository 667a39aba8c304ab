#include <cmath>

#include "doctest.h"
#include "drive/eval/metrics.hpp"
#include "test_util.hpp"

using namespace drive;
using namespace drive::eval;

namespace {

double pair_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1;
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return wins / pairs;
}

PredictionTrace trace(std::vector<double> scores, int label, int t_a) {
  PredictionTrace t;
  t.scores = std::move(scores);
  t.fixations.assign(t.scores.size(), {0.5, 0.5});
  t.annotation.label = label;
  t.annotation.t_a = label ? t_a : -1;
  t.annotation.horizon = static_cast<int>(t.scores.size());
  return t;
}

}  // namespace

TEST_CASE("auc trivial cases") {
  const std::vector<double> s{0.9, 0.8, 0.1, 0.2};
  const std::vector<int> y{1, 1, 0, 0};
  CHECK(auc(s, y) == 1.0);
  const std::vector<double> tied(4, 0.3);
  CHECK(auc(tied, y) == 0.5);
  const std::vector<int> one_class(4, 1);
  CHECK_THROWS_AS(auc(s, one_class), MetricError);
}

TEST_CASE("auc matches pair counting with ties") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> level(0, 6), n_dist(2, 30), bit(0, 1);
  for (int k = 0; k < 500; ++k) {
    const int n = n_dist(rng);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) s[i] = level(rng) / 6.0, y[i] = bit(rng);
    y[0] = 1;
    y[1] = 0;
    CHECK(auc(s, y) == pair_auc(s, y));
  }
}

TEST_CASE("auc is invariant under monotone transforms") {
  std::mt19937_64 rng(2);
  std::vector<double> s(40), t(40);
  std::vector<int> y(40);
  for (int i = 0; i < 40; ++i) {
    s[i] = std::uniform_real_distribution<double>(0, 1)(rng);
    t[i] = std::exp(3 * s[i]) - 7;
    y[i] = i % 3 == 0;
  }
  CHECK(auc(s, y) == auc(t, y));
}

TEST_CASE("video auc aggregates over the evaluation window") {
  // The positive is high only after onset; negatives are flat.
  std::vector<PredictionTrace> traces{trace({0.1, 0.1, 0.9, 0.9}, 1, 2), trace({0.5, 0.5, 0.5, 0.5}, 0, -1)};
  CHECK(video_score(traces[0], VideoAggregate::mean) == doctest::Approx(0.9));
  CHECK(video_score(traces[1], VideoAggregate::max) == 0.5);
  CHECK(video_auc(traces) == 1.0);
  CHECK(parse_aggregate("max") == VideoAggregate::max);
  CHECK_THROWS_AS(parse_aggregate("median"), ConfigError);
}

TEST_CASE("tta hand-walked cases") {
  CHECK(tta(trace(std::vector<double>(30, 1.0), 1, 20), 0.5) == 20);
  CHECK(tta(trace(std::vector<double>(30, 0.0), 1, 20), 0.5) == 0);
  std::vector<double> s(30, 0.6);
  s[0] = 0.1;
  CHECK(tta(trace(s, 1, 20), 0.5, 5) == 19);
  s[3] = 0.2;  // breaks the first window; next run starts at t = 4
  CHECK(tta(trace(s, 1, 20), 0.5, 5) == 16);
  CHECK(tta(trace(s, 1, 20), 0.5, 1) == 19);
  CHECK_THROWS_AS(tta(trace(s, 0, -1), 0.5), ContractError);
}

TEST_CASE("tta never grows with the threshold") {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 200; ++k) {
    const auto arr = drive::testing::random_array<double>(nn::Shape{30}, rng, 0.0, 1.0);
    const std::vector<double> s(arr.values().begin(), arr.values().end());
    const auto tr = trace(s, 1, 25);
    for (const int w : {1, 2, 5}) {
      double prev = INFINITY;
      for (double a0 = 0.0; a0 < 1.0; a0 += 0.05) {
        const double v = tta(tr, a0, w);
        CHECK(v <= prev);
        prev = v;
      }
    }
  }
}

TEST_CASE("mean tta averages positives with zeros for misses") {
  std::vector<PredictionTrace> traces{trace(std::vector<double>(30, 1.0), 1, 20),
                                      trace(std::vector<double>(30, 0.0), 1, 20),
                                      trace(std::vector<double>(30, 1.0), 0, -1)};
  CHECK(mean_tta(traces, 0.5) == 10.0);
}

TEST_CASE("frame metrics trivial and oracle cases") {
  std::vector<PredictionTrace> perfect{trace({0, 0, 1, 1}, 1, 2), trace({0, 0, 0, 0}, 0, -1)};
  auto fm = frame_metrics(perfect, 0.5);
  CHECK(fm.frame_auc == 1.0);
  CHECK(fm.recall == 1.0);
  std::vector<PredictionTrace> constant{trace({0.7, 0.7, 0.7, 0.7}, 1, 2), trace({0.7, 0.7, 0.7, 0.7}, 0, -1)};
  fm = frame_metrics(constant, 0.5);
  CHECK(fm.frame_auc == 0.5);
  CHECK(fm.recall == 1.0);
  CHECK(frame_metrics(constant, 0.8).recall == 0.0);
  CHECK_THROWS_AS(frame_metrics({trace({0.1, 0.2}, 0, -1)}, 0.5), MetricError);

  std::mt19937_64 rng(4);
  for (int k = 0; k < 500; ++k) {
    std::vector<PredictionTrace> ts;
    std::vector<double> all;
    std::vector<int> labels;
    for (int e = 0; e < 4; ++e) {
      const int label = e % 2 == 0;
      std::vector<double> s(6);
      for (auto& v : s) v = std::uniform_int_distribution<int>(0, 4)(rng) / 4.0;
      ts.push_back(trace(s, label, 3));
      for (int t = 0; t < 6; ++t) {
        all.push_back(s[t]);
        labels.push_back(label && t >= 3);
      }
    }
    CHECK(frame_metrics(ts, 0.5).frame_auc == pair_auc(all, labels));
  }
}

namespace {

SaliencyScores loop_saliency(const percept::AttentionMap& p, const percept::AttentionMap& q) {
  const std::size_t n = p.size();
  double sp = 0, sq = 0;
  for (std::size_t i = 0; i < n; ++i) sp += p[i], sq += q[i];
  SaliencyScores s;
  for (std::size_t i = 0; i < n; ++i) {
    const double P = p[i] / sp, Q = q[i] / sq;
    s.sim += std::min(P, Q);
    s.kld += Q * std::log(Q / (P + kKldEps) + kKldEps);
  }
  double mp = sp / n, mq = sq / n, c = 0, vp = 0, vq = 0;
  for (std::size_t i = 0; i < n; ++i) {
    c += (p[i] - mp) * (q[i] - mq);
    vp += (p[i] - mp) * (p[i] - mp);
    vq += (q[i] - mq) * (q[i] - mq);
  }
  s.cc = c / std::sqrt(vp * vq);
  return s;
}

}  // namespace

TEST_CASE("saliency metrics trivial cases") {
  std::mt19937_64 rng(5);
  const auto gt = drive::testing::random_array<float>(nn::Shape{6, 8}, rng, 0.0, 1.0);
  const auto self = saliency_metrics(gt, gt);
  CHECK(self.sim == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(self.cc == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(self.kld) < 1e-9);
  percept::AttentionMap uniform(nn::Shape{6, 8}), delta(nn::Shape{6, 8});
  uniform.fill(1.0f);
  delta[13] = 1.0f;
  CHECK(saliency_metrics(uniform, delta).sim == doctest::Approx(1.0 / 48).epsilon(1e-12));
  CHECK_THROWS_AS(saliency_metrics(uniform, percept::AttentionMap(nn::Shape{8, 6})), ContractError);
}

TEST_CASE("saliency metrics match loop oracles and stay in range") {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 500; ++k) {
    const auto p = drive::testing::random_array<float>(nn::Shape{6, 8}, rng, 0.0, 1.0);
    const auto q = drive::testing::random_array<float>(nn::Shape{6, 8}, rng, 0.0, 1.0);
    const auto a = saliency_metrics(p, q), b = loop_saliency(p, q);
    CHECK(std::abs(a.sim - b.sim) < 1e-10);
    CHECK(std::abs(a.cc - b.cc) < 1e-10);
    CHECK(std::abs(a.kld - b.kld) < 1e-10);
    CHECK((a.sim >= 0 && a.sim <= 1));
    CHECK((a.cc >= -1 && a.cc <= 1));
    CHECK(a.kld >= -1e-12);
  }
}

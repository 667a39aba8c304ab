#include "drive/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace drive::eval {

VideoAggregate parse_aggregate(const std::string& s) {
  if (s == "mean") return VideoAggregate::mean;
  if (s == "max") return VideoAggregate::max;
  throw ConfigError("unknown video aggregate '" + s + "' (expected mean or max)");
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  DRIVE_REQUIRE(scores.size() == labels.size(), "auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of (average) ranks of the positives.
  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j - 1) + 1.0;
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) {
        rank_sum += avg_rank;
        ++pos;
      }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw MetricError("AUC is undefined without both classes");
  const double p = static_cast<double>(pos);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

double video_score(const PredictionTrace& trace, VideoAggregate agg) {
  const auto& s = trace.scores;
  DRIVE_REQUIRE(!s.empty(), "video_score: empty trace");
  const std::size_t begin = trace.annotation.positive() ? static_cast<std::size_t>(trace.annotation.t_a) : 0;
  DRIVE_REQUIRE(begin < s.size(), "video_score: onset beyond trace");
  if (agg == VideoAggregate::max) return *std::max_element(s.begin() + begin, s.end());
  const double total = std::accumulate(s.begin() + begin, s.end(), 0.0);
  return total / static_cast<double>(s.size() - begin);
}

double video_auc(const std::vector<PredictionTrace>& traces, VideoAggregate agg) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& t : traces) {
    scores.push_back(video_score(t, agg));
    labels.push_back(t.annotation.label);
  }
  return auc(scores, labels);
}

double tta(const PredictionTrace& trace, double a0, int window) {
  DRIVE_REQUIRE(trace.annotation.positive(), "tta is defined for positive episodes only");
  DRIVE_REQUIRE(window >= 1, "tta window must be >= 1");
  int run = 0;
  for (std::size_t t = 0; t < trace.scores.size(); ++t) {
    run = trace.scores[t] > a0 ? run + 1 : 0;
    if (run == window) {
      const int start = static_cast<int>(t) - window + 1;
      return std::max(0, trace.annotation.t_a - start);
    }
  }
  return 0.0;
}

double mean_tta(const std::vector<PredictionTrace>& traces, double a0, int window) {
  double total = 0.0;
  int n = 0;
  for (const auto& t : traces)
    if (t.annotation.positive()) {
      total += tta(t, a0, window);
      ++n;
    }
  if (n == 0) throw MetricError("mean TTA needs at least one positive episode");
  return total / n;
}

FrameMetrics frame_metrics(const std::vector<PredictionTrace>& traces, double a0) {
  std::vector<double> scores;
  std::vector<int> labels;
  std::size_t positives = 0, caught = 0;
  for (const auto& tr : traces)
    for (std::size_t t = 0; t < tr.scores.size(); ++t) {
      const int y = tr.annotation.positive() && static_cast<int>(t) >= tr.annotation.t_a ? 1 : 0;
      scores.push_back(tr.scores[t]);
      labels.push_back(y);
      if (y) {
        ++positives;
        if (tr.scores[t] > a0) ++caught;
      }
    }
  FrameMetrics m;
  m.frame_auc = auc(scores, labels);
  m.recall = static_cast<double>(caught) / static_cast<double>(positives);
  return m;
}

double correlation(const percept::AttentionMap& a, const percept::AttentionMap& b) {
  DRIVE_REQUIRE(a.shape() == b.shape(), "correlation: extent mismatch");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

SaliencyScores saliency_metrics(const percept::AttentionMap& pred, const percept::AttentionMap& gt) {
  DRIVE_REQUIRE(pred.shape() == gt.shape(), "saliency_metrics: extent mismatch " + nn::shape_str(pred.shape()) +
                                                " vs " + nn::shape_str(gt.shape()));
  double sp = 0.0, sg = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    sp += pred[i];
    sg += gt[i];
  }
  DRIVE_REQUIRE(sg > 0.0, "saliency_metrics: ground-truth map is identically zero");
  SaliencyScores out;
  out.cc = correlation(pred, gt);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = sp > 0.0 ? pred[i] / sp : 0.0;
    const double q = gt[i] / sg;
    out.sim += std::min(p, q);
    out.kld += q * std::log(q / (p + kKldEps) + kKldEps);
  }
  return out;
}

}  // namespace drive::eval

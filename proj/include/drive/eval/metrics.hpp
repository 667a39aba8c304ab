#pragma once

#include <span>
#include <string>
#include <vector>

#include "drive/percept/types.hpp"
#include "drive/reward/reward.hpp"

namespace drive::eval {

struct PredictionTrace {
  std::vector<double> scores;
  std::vector<percept::FixationPoint> fixations;
  std::vector<percept::AttentionMap> fused;  // optional
  reward::EpisodeAnnotation annotation;
};

enum class VideoAggregate { mean, max };
VideoAggregate parse_aggregate(const std::string& s);

// Rank-sum AUC with half credit for ties. `labels` are 0/1.
double auc(std::span<const double> scores, std::span<const int> labels);

// Per-episode scalar: positives aggregate steps [t_a, L), negatives all steps.
double video_score(const PredictionTrace& trace, VideoAggregate agg);
double video_auc(const std::vector<PredictionTrace>& traces, VideoAggregate agg = VideoAggregate::mean);

// max(0, t_a − t*) where t* starts the first run of `window` consecutive
// scores above a0; 0 when no such run exists.
double tta(const PredictionTrace& trace, double a0, int window = 1);
// Mean over positive traces.
double mean_tta(const std::vector<PredictionTrace>& traces, double a0, int window = 1);

struct FrameMetrics {
  double frame_auc = 0.0;
  double recall = 0.0;
};
FrameMetrics frame_metrics(const std::vector<PredictionTrace>& traces, double a0);

struct SaliencyScores {
  double sim = 0.0;
  double cc = 0.0;
  double kld = 0.0;
};
inline constexpr double kKldEps = 2.22e-16;
SaliencyScores saliency_metrics(const percept::AttentionMap& pred, const percept::AttentionMap& gt);
double correlation(const percept::AttentionMap& a, const percept::AttentionMap& b);

}  // namespace drive::eval

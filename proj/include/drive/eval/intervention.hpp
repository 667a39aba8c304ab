#pragma once

#include <optional>
#include <string>

#include "json.hpp"

#include "drive/eval/metrics.hpp"
#include "drive/train/train.hpp"

namespace drive::eval {

// Test-split report for one attention mode.
struct EvalSummary {
  std::string intervention = "none";
  double video_auc = 0.0;
  double mean_tta_steps = 0.0;
  double mean_tta_seconds = 0.0;
  double frame_auc = 0.0;
  double recall = 0.0;
  // Fused attention against the oracle maps, averaged over frames; absent
  // when the episodes carry no oracle maps.
  std::optional<SaliencyScores> saliency;
  nlohmann::json to_json() const;
};

template <typename T>
EvalSummary evaluate_run(const train::Trainer<T>& trainer, percept::Intervention mode);

struct InterventionReport {
  FrameMetrics baseline, remove, inverse;
  // metric,baseline,remove,inverse
  std::string to_csv() const;
};

// Deterministic evaluation of the test split with the learned attention,
// with S ← 1 and with S ← 1 − S.
template <typename T>
InterventionReport run_intervention(const train::Trainer<T>& trainer);

}  // namespace drive::eval

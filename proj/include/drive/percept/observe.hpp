#pragma once

#include <optional>
#include <string>
#include <vector>

#include "drive/percept/attention.hpp"
#include "drive/percept/saliency.hpp"

namespace drive::percept {

enum class Intervention { none, remove, inverse };

Intervention parse_intervention(const std::string& s);
std::string to_string(Intervention mode);

struct PerceptConfig {
  double m = 0.5;
  FoveationParams foveation;
  Intervention intervention = Intervention::none;
  bool no_fixation = false;   // drop the fixation branch and top-down pass
  bool no_bottom_up = false;  // S = S_td
  bool no_top_down = false;   // S = S_bu, fixation still predicted
  void validate() const;
  bool uses_top_down() const { return !no_fixation && !no_top_down; }
};

// The action emitted at the previous step. The default is the step-0 state:
// no alarm (ρ = 0) and a centred fixation.
struct PreviousAction {
  double score = 0.0;
  FixationPoint fixation{0.5, 0.5};
};

struct Diagnostics {
  AttentionMap s_bu;
  std::optional<AttentionMap> s_td;
  AttentionMap s_fused;
};

// One episode seen through a saliency model. Bottom-up maps and features
// depend only on the frames and are computed once.
class PerceptEnv {
 public:
  PerceptEnv(const SaliencyModel& model, const PerceptConfig& config, const std::vector<Frame>& frames,
             const std::vector<std::vector<ObjectMark>>& marks);

  int horizon() const { return static_cast<int>(frames_->size()); }
  ObservationState observe(int t, const PreviousAction& prev, Diagnostics* diag = nullptr) const;
  const SaliencyOutput& bottom_up(int t) const { return bottom_up_[t]; }
  const PerceptConfig& config() const { return config_; }
  void set_intervention(Intervention mode) { config_.intervention = mode; }

 private:
  const SaliencyModel* model_;
  PerceptConfig config_;
  const std::vector<Frame>* frames_;
  const std::vector<std::vector<ObjectMark>>* marks_;
  std::vector<SaliencyOutput> bottom_up_;
  std::vector<Pyramid> pyramids_;
};

}  // namespace drive::percept

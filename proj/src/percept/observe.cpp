#include "drive/percept/observe.hpp"

namespace drive::percept {

Intervention parse_intervention(const std::string& s) {
  if (s == "none") return Intervention::none;
  if (s == "remove") return Intervention::remove;
  if (s == "inverse") return Intervention::inverse;
  throw ConfigError("unknown intervention mode '" + s + "' (expected none, remove or inverse)");
}

std::string to_string(Intervention mode) {
  switch (mode) {
    case Intervention::none:
      return "none";
    case Intervention::remove:
      return "remove";
    case Intervention::inverse:
      return "inverse";
  }
  return "none";
}

void PerceptConfig::validate() const {
  if (!(m > 0.0 && m < 1.0)) throw ConfigError("m must lie in (0, 1)");
  foveation.validate();
  if (no_bottom_up && no_top_down) throw ConfigError("no_bottom_up and no_top_down together leave no attention");
  if (no_bottom_up && no_fixation)
    throw ConfigError("no_bottom_up requires the top-down pass, which no_fixation removes");
}

PerceptEnv::PerceptEnv(const SaliencyModel& model, const PerceptConfig& config, const std::vector<Frame>& frames,
                       const std::vector<std::vector<ObjectMark>>& marks)
    : model_(&model), config_(config), frames_(&frames), marks_(&marks) {
  config_.validate();
  DRIVE_REQUIRE(marks.size() == frames.size(), "one object list per frame is required");
  bottom_up_.reserve(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) bottom_up_.push_back(model.predict(frames[t], marks[t]));
  if (config_.uses_top_down() && model.variant() != "oracle")
    for (const auto& f : frames) pyramids_.push_back(build_pyramid(f, config_.foveation.levels));
}

ObservationState PerceptEnv::observe(int t, const PreviousAction& prev, Diagnostics* diag) const {
  DRIVE_REQUIRE(t >= 0 && t < horizon(), "observe: step out of range");
  const auto& bu = bottom_up_[t];
  std::optional<AttentionMap> td;
  if (config_.uses_top_down()) {
    static const Pyramid kNone;
    const auto& pyr = pyramids_.empty() ? kNone : pyramids_[t];
    td = model_->predict_foveated((*frames_)[t], pyr, (*marks_)[t], prev.fixation, config_.foveation);
  }

  AttentionMap fused;
  if (!td)
    fused = bu.map;
  else if (config_.no_bottom_up)
    fused = *td;
  else
    fused = daf_fuse(bu.map, *td, prev.score, config_.m);

  if (config_.intervention == Intervention::remove)
    fused.fill(1.0f);
  else if (config_.intervention == Intervention::inverse)
    for (auto& v : fused.values()) v = 1.0f - v;

  auto state = build_state(fused, bu.features);
  if (diag) *diag = {bu.map, std::move(td), std::move(fused)};
  return state;
}

}  // namespace drive::percept

#include "drive/eval/intervention.hpp"

#include <cstdio>

namespace drive::eval {

nlohmann::json EvalSummary::to_json() const {
  nlohmann::json j = {{"intervention", intervention},
                      {"video_auc", video_auc},
                      {"mean_tta_steps", mean_tta_steps},
                      {"mean_tta_seconds", mean_tta_seconds},
                      {"frame_auc", frame_auc},
                      {"recall", recall}};
  if (saliency) j["saliency"] = {{"sim", saliency->sim}, {"cc", saliency->cc}, {"kld", saliency->kld}};
  return j;
}

template <typename T>
EvalSummary evaluate_run(const train::Trainer<T>& trainer, percept::Intervention mode) {
  const auto& cfg = trainer.config();
  const auto& test = trainer.data().test;
  const auto traces = trainer.evaluate(test, mode, true);
  EvalSummary s;
  s.intervention = percept::to_string(mode);
  s.video_auc = video_auc(traces, parse_aggregate(cfg.video_aggregate));
  s.mean_tta_steps = mean_tta(traces, cfg.reward.a0, cfg.tta_window);
  s.mean_tta_seconds = s.mean_tta_steps / trainer.data().fps;
  const auto fm = frame_metrics(traces, cfg.reward.a0);
  s.frame_auc = fm.frame_auc;
  s.recall = fm.recall;

  SaliencyScores total;
  std::size_t n = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& maps = test[i].oracle_maps;
    for (std::size_t t = 0; t < maps.size() && t < traces[i].fused.size(); ++t) {
      const auto& pred = traces[i].fused[t];
      double mass = 0.0, gt_mass = 0.0;
      for (const auto v : pred.values()) mass += v;
      for (const auto v : maps[t].values()) gt_mass += v;
      if (mass <= 0.0 || gt_mass <= 0.0) continue;
      const auto m = saliency_metrics(pred, maps[t]);
      total.sim += m.sim;
      total.cc += m.cc;
      total.kld += m.kld;
      ++n;
    }
  }
  if (n > 0) s.saliency = SaliencyScores{total.sim / n, total.cc / n, total.kld / n};
  return s;
}

std::string InterventionReport::to_csv() const {
  char buf[256];
  std::string out = "metric,baseline,remove,inverse\n";
  std::snprintf(buf, sizeof(buf), "frame_auc,%.9g,%.9g,%.9g\n", baseline.frame_auc, remove.frame_auc,
                inverse.frame_auc);
  out += buf;
  std::snprintf(buf, sizeof(buf), "recall,%.9g,%.9g,%.9g\n", baseline.recall, remove.recall, inverse.recall);
  out += buf;
  return out;
}

template <typename T>
InterventionReport run_intervention(const train::Trainer<T>& trainer) {
  const double a0 = trainer.config().reward.a0;
  auto run = [&](percept::Intervention mode) { return frame_metrics(trainer.evaluate_test(mode), a0); };
  return {run(percept::Intervention::none), run(percept::Intervention::remove), run(percept::Intervention::inverse)};
}

template EvalSummary evaluate_run(const train::Trainer<float>&, percept::Intervention);
template EvalSummary evaluate_run(const train::Trainer<double>&, percept::Intervention);
template InterventionReport run_intervention(const train::Trainer<float>&);
template InterventionReport run_intervention(const train::Trainer<double>&);

}  // namespace drive::eval

#include "drive/train/config.hpp"

#include <cstdio>

#include "drive/io.hpp"

namespace drive::train {

namespace {

// Calls visit(key, field) for every configurable field, in a fixed order.
template <typename Config, typename Visit>
void each_field(Config& c, Visit&& visit) {
  auto& t = c.trainer;
  visit("lr", t.lr);
  visit("lr_alpha", t.lr_alpha);
  visit("gamma", t.gamma);
  visit("tau", t.tau);
  visit("alpha_init", t.alpha_init);
  visit("alpha_min", t.alpha_min);
  visit("weight_decay", t.weight_decay);
  visit("w1", t.w1);
  visit("w2", t.w2);
  visit("ws", t.ws);
  visit("target_entropy", t.target_entropy);
  visit("critic_updates", t.critic_updates);
  visit("actor_updates", t.actor_updates);
  visit("batch_size", t.batch_size);
  visit("video_batch", t.video_batch);
  visit("epochs", t.epochs);
  visit("buffer_capacity", t.buffer_capacity);
  visit("warmup", t.warmup);
  visit("grad_clip", t.grad_clip);
  visit("checkpoint_every", t.checkpoint_every);
  visit("no_rae", t.no_rae);
  visit("sl_only", t.sl_only);
  visit("workers", t.workers);
  visit("precision", t.precision);

  visit("a0", c.reward.a0);
  visit("eta", c.reward.eta);

  auto& s = c.scene;
  visit("height", s.height);
  visit("width", s.width);
  visit("horizon", s.horizon);
  visit("min_objects", s.min_objects);
  visit("max_objects", s.max_objects);
  visit("cue_lead", s.cue_lead);
  visit("onset_fraction", s.onset_fraction);
  visit("approach_growth", s.approach_growth);
  visit("noise", s.noise);
  visit("scene_seed", s.seed);

  auto& p = c.percept;
  visit("m", p.m);
  visit("foveation_levels", p.foveation.levels);
  visit("foveation_falloff", p.foveation.falloff);
  visit("intervention", p.intervention);
  visit("no_fixation", p.no_fixation);
  visit("no_bottom_up", p.no_bottom_up);
  visit("no_top_down", p.no_top_down);

  visit("n_train", c.n_train);
  visit("n_test", c.n_test);
  visit("fps", c.fps);
  visit("saliency", c.saliency);
  visit("saliency_checkpoint", c.saliency_checkpoint);
  visit("video_aggregate", c.video_aggregate);
  visit("tta_window", c.tta_window);
  visit("pretrain_epochs", c.pretrain_epochs);
  visit("seed", c.seed);
  visit("data_dir", c.data_dir);
  visit("out_dir", c.out_dir);
}

template <typename V>
nlohmann::json dump_value(const V& v) {
  return v;
}
nlohmann::json dump_value(const percept::Intervention& v) { return percept::to_string(v); }
nlohmann::json dump_value(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

template <typename V>
void load_value(const std::string& key, const nlohmann::json& j, V& out) {
  try {
    if constexpr (std::is_same_v<V, bool>) {
      if (!j.is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<V>) {
      if (!j.is_number_integer()) throw ConfigError("");
      if constexpr (std::is_unsigned_v<V>)
        if (j.get<long long>() < 0) throw ConfigError("");
    } else if constexpr (std::is_floating_point_v<V>) {
      if (!j.is_number()) throw ConfigError("");
    } else {
      if (!j.is_string()) throw ConfigError("");
    }
    out = j.get<V>();
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type: " + j.dump());
  }
}
void load_value(const std::string& key, const nlohmann::json& j, percept::Intervention& out) {
  if (!j.is_string()) throw ConfigError("config key '" + key + "' must be a string");
  out = percept::parse_intervention(j.get<std::string>());
}
void load_value(const std::string& key, const nlohmann::json& j, std::optional<double>& out) {
  if (j.is_null()) {
    out.reset();
    return;
  }
  if (!j.is_number()) throw ConfigError("config key '" + key + "' must be a number or null");
  out = j.get<double>();
}

}  // namespace

double RunConfig::target_entropy() const {
  return trainer.target_entropy ? *trainer.target_entropy : -static_cast<double>(action_dim());
}

void RunConfig::validate() const {
  const auto& t = trainer;
  auto positive = [](double v, const char* key) {
    if (!(v > 0.0)) throw ConfigError(std::string("config key '") + key + "' must be positive");
  };
  positive(t.lr, "lr");
  positive(t.lr_alpha, "lr_alpha");
  positive(t.alpha_init, "alpha_init");
  positive(t.alpha_min, "alpha_min");
  positive(t.grad_clip, "grad_clip");
  if (!(t.gamma >= 0.0 && t.gamma <= 1.0)) throw ConfigError("config key 'gamma' must lie in [0, 1]");
  if (!(t.tau > 0.0 && t.tau <= 1.0)) throw ConfigError("config key 'tau' must lie in (0, 1]");
  if (t.alpha_init < t.alpha_min) throw ConfigError("alpha_init must be >= alpha_min");
  if (t.weight_decay < 0 || t.w1 < 0 || t.w2 < 0 || t.ws < 0) throw ConfigError("loss coefficients must be >= 0");
  if (t.critic_updates < 0 || t.actor_updates < 0) throw ConfigError("update counts must be >= 0");
  if (t.batch_size < 1 || t.video_batch < 1 || t.epochs < 1) throw ConfigError("batch sizes and epochs must be >= 1");
  if (t.buffer_capacity < static_cast<std::size_t>(t.batch_size)) throw ConfigError("buffer_capacity below batch_size");
  if (t.warmup < 0 || t.checkpoint_every < 0) throw ConfigError("warmup and checkpoint_every must be >= 0");
  if (t.workers < 1) throw ConfigError("workers must be >= 1");
  if (t.precision != "f32" && t.precision != "f64") throw ConfigError("precision must be f32 or f64");
  reward.validate();
  scene.validate();
  percept.validate();
  if (percept.intervention != percept::Intervention::none && percept.no_top_down && percept.no_bottom_up)
    throw ConfigError("intervention requires an attention map");
  if (n_train < 1 || n_test < 0) throw ConfigError("n_train must be >= 1 and n_test >= 0");
  if (!(fps > 0.0)) throw ConfigError("fps must be positive");
  if (saliency != "oracle" && saliency != "conv") throw ConfigError("saliency must be oracle or conv");
  if (video_aggregate != "mean" && video_aggregate != "max") throw ConfigError("video_aggregate must be mean or max");
  if (tta_window < 1) throw ConfigError("tta_window must be >= 1");
  if (pretrain_epochs < 1) throw ConfigError("pretrain_epochs must be >= 1");
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  each_field(*this, [&](const char* key, const auto& v) { j[key] = dump_value(v); });
  return j;
}

void RunConfig::apply(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a flat JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool found = false;
    each_field(*this, [&](const char* key, auto& v) {
      if (!found && it.key() == key) {
        load_value(it.key(), it.value(), v);
        found = true;
      }
    });
    if (!found) throw ConfigError("unknown config key '" + it.key() + "'");
  }
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  nlohmann::json v;
  try {
    v = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    v = text;
  }
  apply(nlohmann::json{{key, v}});
}

std::string RunConfig::hash() const {
  // FNV-1a over the canonical dump.
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char ch : to_json().dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("config file not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(path));
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + ex.what());
  }
  RunConfig c;
  c.apply(j);
  return c;
}

}  // namespace drive::train

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "drive/percept/observe.hpp"
#include "drive/reward/reward.hpp"
#include "drive/synth/episode.hpp"

namespace drive::train {

struct TrainerConfig {
  double lr = 3e-4;
  double lr_alpha = 5e-5;
  double gamma = 0.99;
  double tau = 0.005;
  double alpha_init = 0.2;
  double alpha_min = 1e-4;     // α0
  double weight_decay = 1e-5;  // w0
  double w1 = 1.0;             // anticipation loss coefficient
  double w2 = 10.0;            // fixation loss coefficient
  double ws = 1e-4;            // latent regulariser
  // H0 in J(α) = E[−α log π − α H0]; unset means −(action dim).
  std::optional<double> target_entropy;
  int critic_updates = 4;  // per environment step
  int actor_updates = 2;
  int batch_size = 64;
  int video_batch = 5;
  int epochs = 50;
  std::size_t buffer_capacity = 1000000;
  int warmup = 64;
  double grad_clip = 10.0;
  int checkpoint_every = 10;
  bool no_rae = false;
  bool sl_only = false;
  int workers = 1;
  std::string precision = "f32";
};

struct RunConfig {
  TrainerConfig trainer;
  reward::RewardConfig reward;
  synth::SceneSpec scene;
  percept::PerceptConfig percept;
  int n_train = 200;
  int n_test = 50;
  double fps = 6.0;
  std::string saliency = "oracle";  // or "conv"
  std::string saliency_checkpoint;
  std::string video_aggregate = "mean";
  int tta_window = 1;
  int pretrain_epochs = 8;
  std::uint64_t seed = 0;
  std::string data_dir;
  std::string out_dir;

  // Rejects invalid values and flag combinations.
  void validate() const;
  double target_entropy() const;
  std::size_t action_dim() const { return percept.no_fixation ? 1 : 3; }

  nlohmann::json to_json() const;
  // Applies keys of a flat object on top of the current values; unknown keys
  // and type mismatches raise ConfigError naming the key.
  void apply(const nlohmann::json& j);
  // "key=value"; the value is parsed as JSON, falling back to a string.
  void apply_override(const std::string& assignment);
  std::string hash() const;

  static RunConfig from_file(const std::filesystem::path& path);
};

}  // namespace drive::train

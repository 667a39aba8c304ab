#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "drive/eval/metrics.hpp"
#include "drive/train/config.hpp"
#include "drive/train/replay.hpp"
#include "drive/train/sac.hpp"

namespace drive::train {

enum class RolloutMode { train, eval };

template <typename T>
struct Rollout {
  std::vector<Transition<T>> transitions;  // empty in eval mode
  eval::PredictionTrace trace;
  double total_reward = 0.0;
};

// Runs one episode from t = 0 (centred fixation, no alarm). Train mode samples
// actions with `rng`; eval mode uses the mean action and never touches `rng`.
template <typename T>
Rollout<T> rollout_episode(const percept::PerceptEnv& env, const agent::Agent<T>& agent,
                           const reward::EpisodeAnnotation& annotation, const reward::RewardConfig& reward_cfg,
                           std::mt19937_64& rng, RolloutMode mode, bool keep_maps = false);

struct EpochLog {
  int epoch = 0;
  double reward_mean = 0.0;
  double critic_loss = 0.0;
  double actor_loss_a = 0.0;
  double actor_loss_f = 0.0;
  double alpha = 0.0;
  double eval_auc = 0.0;
  double eval_tta = 0.0;
};

inline constexpr const char* kTrainLogHeader =
    "epoch,reward_mean,critic_loss,actor_loss_a,actor_loss_f,alpha,eval_auc,eval_tta";
std::string format_log_row(const EpochLog& row);

agent::AgentConfig agent_config_for(const RunConfig& cfg, const percept::GridSpec& grid);
UpdateConfig update_config_for(const RunConfig& cfg);

// Training state for one run: agent, learner, replay buffer and the perception
// environments of every episode.
template <typename T>
class Trainer {
 public:
  Trainer(const RunConfig& cfg, const synth::Dataset& data, const percept::SaliencyModel& saliency);

  // One epoch over the training split followed by an evaluation pass.
  EpochLog run_epoch();
  // Runs the remaining epochs. With a non-empty `out` the log, a resolved
  // config snapshot and checkpoints are written there.
  std::vector<EpochLog> train(const std::filesystem::path& out = {},
                              const std::function<void(const EpochLog&)>& on_epoch = {});

  std::vector<eval::PredictionTrace> evaluate(const std::vector<synth::Episode>& episodes,
                                              percept::Intervention mode = percept::Intervention::none,
                                              bool keep_maps = false) const;
  std::vector<eval::PredictionTrace> evaluate_test(percept::Intervention mode = percept::Intervention::none) const;

  agent::Agent<T>& agent() { return *agent_; }
  const agent::Agent<T>& agent() const { return *agent_; }
  SacLearner<T>& learner() { return *learner_; }
  const ReplayBuffer<T>& buffer() const { return buffer_; }
  int epoch() const { return epoch_; }
  const RunConfig& config() const { return cfg_; }
  const synth::Dataset& data() const { return *data_; }

  nn::Checkpoint checkpoint() const;
  // Restores agent, optimiser state and epoch counter.
  void load(const nn::Checkpoint& ck);

 private:
  void update_step(double& critic_sum, double& actor_a_sum, double& actor_f_sum, int& n_critic, int& n_actor);
  std::vector<Rollout<T>> collect(const std::vector<std::size_t>& episodes, const std::vector<std::uint64_t>& seeds);

  RunConfig cfg_;
  const synth::Dataset* data_;
  const percept::SaliencyModel* saliency_;
  std::vector<std::vector<std::vector<percept::ObjectMark>>> train_marks_, test_marks_;
  std::vector<std::unique_ptr<percept::PerceptEnv>> train_envs_, test_envs_;
  std::unique_ptr<agent::Agent<T>> agent_;
  std::unique_ptr<SacLearner<T>> learner_;
  ReplayBuffer<T> buffer_;
  std::mt19937_64 rng_;
  int epoch_ = 0;
};

// Loads or builds the saliency model named by the config.
std::unique_ptr<percept::SaliencyModel> make_saliency(const RunConfig& cfg);

}  // namespace drive::train

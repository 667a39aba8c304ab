#pragma once

#include <memory>
#include <optional>

#include "drive/nn/checkpoint.hpp"
#include "drive/nn/distributions.hpp"
#include "drive/nn/layers.hpp"
#include "drive/percept/types.hpp"

namespace drive::agent {

struct AgentConfig {
  std::size_t state_dim = 128;
  std::size_t latent_dim = 64;
  std::size_t encoder_hidden = 96;
  std::size_t policy_hidden = 64;
  std::size_t lstm_hidden = 64;
  std::size_t critic_hidden = 64;
  bool fixation = true;  // false: accident branch only, action dim 1

  std::size_t action_dim() const { return fixation ? 3 : 1; }
  nlohmann::json to_json() const;
  static AgentConfig from_json(const nlohmann::json& j);
};

// Recurrent state of both policy branches, one row per batch element.
template <typename T>
struct Hidden {
  nn::NdArray<T> h_a, c_a, h_f, c_f;

  static Hidden zeros(std::size_t batch, std::size_t width, bool fixation);
  std::size_t batch() const { return h_a.rows(); }
  Hidden row(std::size_t i) const;
  // Stacks single-row hidden states into a batch.
  static Hidden stack(const std::vector<const Hidden*>& rows);
  bool operator==(const Hidden&) const = default;
};

template <typename T>
struct BranchOutput {
  nn::Var<T> mean;
  nn::Var<T> log_std;
  nn::Var<T> h;
  nn::Var<T> c;
};

template <typename T>
struct PolicyOutput {
  BranchOutput<T> a;                 // accident score, k = 1
  std::optional<BranchOutput<T>> f;  // fixation, k = 2
  Hidden<T> next_hidden() const;
};

template <typename T>
struct SampledAction {
  nn::Var<T> raw;         // [n×action_dim] in (−1, 1)
  nn::Var<T> log_prob;    // [n×1], sum of the branch terms
  nn::Var<T> log_prob_a;  // [n×1]
  std::optional<nn::Var<T>> log_prob_f;
};

struct ScaledAction {
  double score = 0.5;
  percept::FixationPoint fixation{0.5, 0.5};
};

// score = (raw₀ + 1)/2, fixation = ((raw₁ + 1)/2, (raw₂ + 1)/2).
ScaledAction scale_action(std::span<const double> raw);
template <typename T>
ScaledAction scale_action_row(const nn::NdArray<T>& raw, std::size_t row);

template <typename T>
class PolicyBranch {
 public:
  PolicyBranch() = default;
  PolicyBranch(std::size_t in, std::size_t hidden, std::size_t lstm, std::size_t k, nn::Rng& rng);
  BranchOutput<T> operator()(const nn::Var<T>& z, const nn::Var<T>& h, const nn::Var<T>& c) const;
  void collect(nn::ParamList<T>& out, const std::string& prefix) const;

  nn::Dense<T> fc1, fc2;
  nn::LstmCell<T> lstm;
  nn::Dense<T> mean_head, log_std_head;
};

template <typename T>
class Critic {
 public:
  Critic() = default;
  Critic(std::size_t in, std::size_t hidden, nn::Rng& rng);
  nn::Var<T> operator()(const nn::Var<T>& z, const nn::Var<T>& action) const;
  void collect(nn::ParamList<T>& out, const std::string& prefix) const;

  nn::Dense<T> l1, l2, out;
};

enum class CriticSet { online, target };

template <typename T>
class Agent {
 public:
  Agent(const AgentConfig& config, nn::Rng& rng);

  const AgentConfig& config() const { return config_; }

  nn::Var<T> encode(const nn::Var<T>& s) const;
  nn::Var<T> decode(const nn::Var<T>& z) const;

  PolicyOutput<T> policy_forward(const nn::Var<T>& z, const Hidden<T>& hidden) const;
  // Reparameterised sample; `noise` is [n×action_dim].
  SampledAction<T> sample(const PolicyOutput<T>& out, const nn::NdArray<T>& noise) const;
  // tanh of the means, no sampling.
  nn::Var<T> deterministic(const PolicyOutput<T>& out) const;

  std::pair<nn::Var<T>, nn::Var<T>> q_values(const nn::Var<T>& z, const nn::Var<T>& raw_action,
                                             CriticSet which) const;

  // θ̄ ← τθ + (1 − τ)θ̄ for both critics.
  void soft_update(double tau);

  nn::ParamList<T> encoder_params() const;
  nn::ParamList<T> decoder_params() const;
  nn::ParamList<T> actor_params() const;
  nn::ParamList<T> actor_a_params() const;
  nn::ParamList<T> actor_f_params() const;
  nn::ParamList<T> critic_params() const;
  nn::ParamList<T> target_params() const;
  nn::ParamList<T> all_params() const;  // everything except targets

  double alpha() const { return alpha_; }
  void set_alpha(double a) { alpha_ = a; }

  std::unique_ptr<Agent> clone() const;
  void save(nn::Checkpoint& ck) const;
  void load(const nn::Checkpoint& ck);

 private:
  AgentConfig config_;
  nn::Dense<T> enc1_, enc2_, enc3_;
  nn::Dense<T> dec1_, dec2_, dec3_;
  PolicyBranch<T> branch_a_, branch_f_;
  Critic<T> q1_, q2_, q1_target_, q2_target_;
  double alpha_ = 0.2;
};

}  // namespace drive::agent

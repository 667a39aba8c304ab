#pragma once

#include <optional>
#include <random>

#include "drive/nn/adam.hpp"
#include "drive/train/replay.hpp"

namespace drive::train {

struct UpdateConfig {
  double lr = 3e-4;
  double lr_alpha = 5e-5;
  double gamma = 0.99;
  double tau = 0.005;
  double alpha_min = 1e-4;
  double weight_decay = 1e-5;
  double w1 = 1.0;
  double w2 = 10.0;
  double ws = 1e-4;
  double target_entropy = -3.0;  // H0
  double grad_clip = 10.0;
  bool sl_only = false;
};

// y = r + γ(1 − d)(min_j Q̄_j(z′, â′) − α log π(â′|s′)), â′ drawn with `noise`
// from the current policy at s′. Computed without recording gradients.
template <typename T>
nn::NdArray<T> critic_target(const Batch<T>& batch, const agent::Agent<T>& agent, double alpha, double gamma,
                             const nn::NdArray<T>& noise);

// Σ_j mean[(Q_j(z, a) − y)²] with z = encode(s).
template <typename T>
nn::Var<T> critic_loss(const Batch<T>& batch, const agent::Agent<T>& agent, const nn::NdArray<T>& y);

template <typename T>
struct ActorLosses {
  nn::Var<T> total;  // J_o + w1·BCE + w2·fix; its gradient w.r.t. each branch equals that branch's loss gradient
  nn::Var<T> j_o;
  nn::Var<T> j_a;
  std::optional<nn::Var<T>> j_f;
  nn::NdArray<T> log_prob;  // [n×1], detached
};

// J_o = mean[α log π(â|s) − min_j Q_j(z, â)] + w0‖φ‖²; z is detached from the encoder.
template <typename T>
ActorLosses<T> actor_loss(const Batch<T>& batch, const agent::Agent<T>& agent, double alpha,
                          const nn::NdArray<T>& noise, const UpdateConfig& cfg);

// ∂J(α)/∂α = mean[−log π − H0]
template <typename T>
double alpha_gradient(const nn::NdArray<T>& log_prob, double target_entropy);
// max(α − λ_α·g, α0)
double alpha_step(double alpha, double gradient, double lr_alpha, double alpha_min);

// mean‖decode(encode(s)) − s‖² + w0‖β‖² + w_s·mean‖z‖²
template <typename T>
nn::Var<T> rae_loss(const Batch<T>& batch, const agent::Agent<T>& agent, const UpdateConfig& cfg);

// Owns the three optimisers (critic + encoder, actor, encoder + decoder) and
// the noise stream used by the stochastic parts of the updates.
template <typename T>
class SacLearner {
 public:
  SacLearner(agent::Agent<T>& agent, const UpdateConfig& cfg, std::uint64_t seed);

  double critic_update(const Batch<T>& batch);
  std::pair<double, double> actor_update(const Batch<T>& batch);
  double alpha_update(const Batch<T>& batch);
  double rae_update(const Batch<T>& batch);

  const UpdateConfig& config() const { return cfg_; }
  agent::Agent<T>& agent() { return *agent_; }
  std::mt19937_64& rng() { return rng_; }

  void save(nn::Checkpoint& ck) const;
  void load(const nn::Checkpoint& ck);

 private:
  nn::NdArray<T> noise(std::size_t n);

  agent::Agent<T>* agent_;
  UpdateConfig cfg_;
  std::mt19937_64 rng_;
  nn::Adam<T> critic_opt_, actor_opt_, rae_opt_;
};

}  // namespace drive::train

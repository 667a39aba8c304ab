#include "drive/train/sac.hpp"

#include <cmath>

#include "drive/reward/reward.hpp"

namespace drive::train {

using nn::NdArray;
using nn::Var;

namespace {

template <typename T>
Var<T> l2_penalty(const nn::ParamList<T>& params, double coeff) {
  Var<T> total = nn::constant(NdArray<T>::scalar(T{0}));
  if (coeff == 0.0) return total;
  for (const auto& p : params) total = nn::add(total, nn::sum_squares(p.var));
  return nn::scale(total, static_cast<T>(coeff));
}

// Temporarily removes parameters from gradient tracking.
template <typename T>
class FreezeGuard {
 public:
  explicit FreezeGuard(nn::ParamList<T> params) : params_(std::move(params)) { nn::set_requires_grad(params_, false); }
  ~FreezeGuard() { nn::set_requires_grad(params_, true); }

 private:
  nn::ParamList<T> params_;
};

}  // namespace

template <typename T>
NdArray<T> critic_target(const Batch<T>& batch, const agent::Agent<T>& agent, double alpha, double gamma,
                         const NdArray<T>& noise) {
  nn::NoGradGuard guard;
  const auto z_next = agent.encode(nn::constant(batch.s_next));
  const auto out = agent.policy_forward(z_next, batch.h_out);
  const auto next = agent.sample(out, noise);
  const auto [q1, q2] = agent.q_values(z_next, next.raw, agent::CriticSet::target);
  NdArray<T> y(nn::Shape{batch.size(), 1});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double soft = std::min<double>(q1.value()[i], q2.value()[i]) - alpha * next.log_prob.value()[i];
    y[i] = static_cast<T>(batch.reward[i] + gamma * (1.0 - batch.done[i]) * soft);
  }
  return y;
}

template <typename T>
Var<T> critic_loss(const Batch<T>& batch, const agent::Agent<T>& agent, const NdArray<T>& y) {
  const auto z = agent.encode(nn::constant(batch.s));
  const auto [q1, q2] = agent.q_values(z, nn::constant(batch.action), agent::CriticSet::online);
  const auto target = nn::constant(y);
  return nn::add(nn::mean(nn::square(nn::sub(q1, target))), nn::mean(nn::square(nn::sub(q2, target))));
}

template <typename T>
ActorLosses<T> actor_loss(const Batch<T>& batch, const agent::Agent<T>& agent, double alpha,
                          const NdArray<T>& noise, const UpdateConfig& cfg) {
  Var<T> z;
  {
    nn::NoGradGuard guard;
    z = agent.encode(nn::constant(batch.s));
  }
  z = nn::detach(z);
  const auto out = agent.policy_forward(z, batch.h_in);
  const auto act = agent.sample(out, noise);

  ActorLosses<T> L;
  L.log_prob = act.log_prob.value();
  const auto [q1, q2] = agent.q_values(z, act.raw, agent::CriticSet::online);
  const auto soft = nn::sub(nn::scale(act.log_prob, static_cast<T>(alpha)), nn::minimum(q1, q2));
  L.j_o = nn::add(nn::mean(soft), l2_penalty(agent.actor_params(), cfg.weight_decay));

  // Exponentially weighted BCE on the sampled score.
  const auto score = nn::clamp(nn::scale(nn::add_scalar(nn::slice_cols(act.raw, 0, 1), T{1}), T{0.5}),
                               static_cast<T>(reward::kScoreEps), static_cast<T>(1.0 - reward::kScoreEps));
  NdArray<T> pos_w(batch.label.shape()), neg_w(batch.label.shape());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    pos_w[i] = batch.label[i] * batch.bce_weight[i];
    neg_w[i] = T{1} - batch.label[i];
  }
  const auto bce = nn::scale(nn::add(nn::mul_const(nn::log(score), pos_w),
                                     nn::mul_const(nn::log(nn::add_scalar(nn::scale(score, T{-1}), T{1})), neg_w)),
                             T{-1});
  const auto bce_mean = nn::mean(bce);
  const auto zero = nn::constant(NdArray<T>::scalar(T{0}));
  const auto base = cfg.sl_only ? zero : L.j_o;
  L.j_a = nn::add(base, nn::scale(bce_mean, static_cast<T>(cfg.w1)));
  L.total = L.j_a;
  if (out.f) {
    const auto p_hat = nn::scale(nn::add_scalar(nn::slice_cols(act.raw, 1, 2), T{1}), T{0.5});
    const auto dist = nn::row_norm(nn::sub(p_hat, nn::constant(batch.gt)));
    const auto fix = nn::scale(nn::mean(nn::mul_const(dist, batch.gt_mask)), static_cast<T>(cfg.w2));
    L.j_f = nn::add(base, fix);
    L.total = nn::add(L.total, fix);
  }
  return L;
}

template <typename T>
double alpha_gradient(const NdArray<T>& log_prob, double target_entropy) {
  DRIVE_REQUIRE(log_prob.size() > 0, "alpha_gradient: empty batch");
  double s = 0.0;
  for (std::size_t i = 0; i < log_prob.size(); ++i) s += -static_cast<double>(log_prob[i]) - target_entropy;
  return s / static_cast<double>(log_prob.size());
}

double alpha_step(double alpha, double gradient, double lr_alpha, double alpha_min) {
  return std::max(alpha - lr_alpha * gradient, alpha_min);
}

template <typename T>
Var<T> rae_loss(const Batch<T>& batch, const agent::Agent<T>& agent, const UpdateConfig& cfg) {
  const auto s = nn::constant(batch.s);
  const auto z = agent.encode(s);
  const auto recon = nn::sum_squares(nn::sub(agent.decode(z), s));
  const T inv_n = static_cast<T>(1.0 / static_cast<double>(batch.size()));
  auto loss = nn::scale(recon, inv_n);
  loss = nn::add(loss, nn::scale(nn::sum_squares(z), static_cast<T>(cfg.ws) * inv_n));
  auto beta = agent.encoder_params();
  const auto dec = agent.decoder_params();
  beta.insert(beta.end(), dec.begin(), dec.end());
  return nn::add(loss, l2_penalty(beta, cfg.weight_decay));
}

// ---------------------------------------------------------------- learner

namespace {

template <typename T>
nn::ParamList<T> join(nn::ParamList<T> a, const nn::ParamList<T>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

template <typename T>
SacLearner<T>::SacLearner(agent::Agent<T>& agent, const UpdateConfig& cfg, std::uint64_t seed)
    : agent_(&agent),
      cfg_(cfg),
      rng_(seed),
      critic_opt_(join(agent.critic_params(), agent.encoder_params()), {.lr = cfg.lr}),
      actor_opt_(agent.actor_params(), {.lr = cfg.lr}),
      rae_opt_(join(agent.encoder_params(), agent.decoder_params()), {.lr = cfg.lr}) {}

template <typename T>
NdArray<T> SacLearner<T>::noise(std::size_t n) {
  std::normal_distribution<double> nd(0.0, 1.0);
  NdArray<T> out(nn::Shape{n, agent_->config().action_dim()});
  for (auto& v : out.values()) v = static_cast<T>(nd(rng_));
  return out;
}

template <typename T>
double SacLearner<T>::critic_update(const Batch<T>& batch) {
  const auto y = critic_target(batch, *agent_, agent_->alpha(), cfg_.gamma, noise(batch.size()));
  critic_opt_.zero_grad();
  const auto loss = critic_loss(batch, *agent_, y);
  nn::backward(loss);
  nn::clip_grad_norm(critic_opt_.params(), cfg_.grad_clip);
  critic_opt_.step();
  return static_cast<double>(loss.item());
}

template <typename T>
std::pair<double, double> SacLearner<T>::actor_update(const Batch<T>& batch) {
  actor_opt_.zero_grad();
  // Critic weights stay fixed for the whole actor pass, backward included.
  FreezeGuard<T> freeze(agent_->critic_params());
  const auto L = actor_loss(batch, *agent_, agent_->alpha(), noise(batch.size()), cfg_);
  nn::backward(L.total);
  nn::clip_grad_norm(actor_opt_.params(), cfg_.grad_clip);
  actor_opt_.step();
  return {static_cast<double>(L.j_a.item()), L.j_f ? static_cast<double>(L.j_f->item()) : 0.0};
}

template <typename T>
double SacLearner<T>::alpha_update(const Batch<T>& batch) {
  NdArray<T> log_prob;
  {
    nn::NoGradGuard guard;
    const auto z = agent_->encode(nn::constant(batch.s));
    const auto out = agent_->policy_forward(z, batch.h_in);
    log_prob = agent_->sample(out, noise(batch.size())).log_prob.value();
  }
  const double a = alpha_step(agent_->alpha(), alpha_gradient(log_prob, cfg_.target_entropy), cfg_.lr_alpha,
                              cfg_.alpha_min);
  agent_->set_alpha(a);
  return a;
}

template <typename T>
double SacLearner<T>::rae_update(const Batch<T>& batch) {
  rae_opt_.zero_grad();
  const auto loss = rae_loss(batch, *agent_, cfg_);
  nn::backward(loss);
  nn::clip_grad_norm(rae_opt_.params(), cfg_.grad_clip);
  rae_opt_.step();
  return static_cast<double>(loss.item());
}

namespace {

template <typename T>
void save_adam(nn::Checkpoint& ck, const std::string& prefix, const nn::Adam<T>& opt) {
  const auto& st = opt.state();
  ck.put_int(prefix + ".step", st.step);
  for (std::size_t i = 0; i < st.m.size(); ++i) {
    ck.put(prefix + ".m." + opt.params()[i].name, st.m[i]);
    ck.put(prefix + ".v." + opt.params()[i].name, st.v[i]);
  }
}

template <typename T>
void load_adam(const nn::Checkpoint& ck, const std::string& prefix, nn::Adam<T>& opt) {
  auto& st = opt.state();
  st.step = ck.get_int(prefix + ".step");
  st.m.clear();
  st.v.clear();
  if (st.step == 0) return;
  for (const auto& p : opt.params()) {
    st.m.push_back(ck.get<T>(prefix + ".m." + p.name));
    st.v.push_back(ck.get<T>(prefix + ".v." + p.name));
  }
}

}  // namespace

template <typename T>
void SacLearner<T>::save(nn::Checkpoint& ck) const {
  save_adam(ck, "opt.critic", critic_opt_);
  save_adam(ck, "opt.actor", actor_opt_);
  save_adam(ck, "opt.rae", rae_opt_);
}

template <typename T>
void SacLearner<T>::load(const nn::Checkpoint& ck) {
  load_adam(ck, "opt.critic", critic_opt_);
  load_adam(ck, "opt.actor", actor_opt_);
  load_adam(ck, "opt.rae", rae_opt_);
}

#define DRIVE_INSTANTIATE_SAC(T)                                                                              \
  template NdArray<T> critic_target(const Batch<T>&, const agent::Agent<T>&, double, double, const NdArray<T>&); \
  template Var<T> critic_loss(const Batch<T>&, const agent::Agent<T>&, const NdArray<T>&);                    \
  template ActorLosses<T> actor_loss(const Batch<T>&, const agent::Agent<T>&, double, const NdArray<T>&,       \
                                     const UpdateConfig&);                                                    \
  template double alpha_gradient(const NdArray<T>&, double);                                                  \
  template Var<T> rae_loss(const Batch<T>&, const agent::Agent<T>&, const UpdateConfig&);                     \
  template class SacLearner<T>;

DRIVE_INSTANTIATE_SAC(float)
DRIVE_INSTANTIATE_SAC(double)

}  // namespace drive::train

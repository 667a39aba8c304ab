#include "drive/agent/agent.hpp"

#include <algorithm>
#include <cmath>

namespace drive::agent {

using nn::Var;

nlohmann::json AgentConfig::to_json() const {
  return {{"state_dim", state_dim},         {"latent_dim", latent_dim},   {"encoder_hidden", encoder_hidden},
          {"policy_hidden", policy_hidden}, {"lstm_hidden", lstm_hidden}, {"critic_hidden", critic_hidden},
          {"fixation", fixation}};
}

AgentConfig AgentConfig::from_json(const nlohmann::json& j) {
  AgentConfig c;
  c.state_dim = j.at("state_dim").get<std::size_t>();
  c.latent_dim = j.at("latent_dim").get<std::size_t>();
  c.encoder_hidden = j.at("encoder_hidden").get<std::size_t>();
  c.policy_hidden = j.at("policy_hidden").get<std::size_t>();
  c.lstm_hidden = j.at("lstm_hidden").get<std::size_t>();
  c.critic_hidden = j.at("critic_hidden").get<std::size_t>();
  c.fixation = j.at("fixation").get<bool>();
  return c;
}

// ---------------------------------------------------------------- hidden

template <typename T>
Hidden<T> Hidden<T>::zeros(std::size_t batch, std::size_t width, bool fixation) {
  Hidden h;
  h.h_a = h.c_a = nn::NdArray<T>(nn::Shape{batch, width});
  if (fixation) h.h_f = h.c_f = nn::NdArray<T>(nn::Shape{batch, width});
  return h;
}

namespace {

template <typename T>
nn::NdArray<T> take_row(const nn::NdArray<T>& a, std::size_t i) {
  if (a.empty()) return {};
  nn::NdArray<T> out(nn::Shape{1, a.cols()});
  std::copy_n(a.data() + i * a.cols(), a.cols(), out.data());
  return out;
}

template <typename T>
nn::NdArray<T> stack_rows(const std::vector<const nn::NdArray<T>*>& rows) {
  if (rows.empty() || rows.front()->empty()) return {};
  const std::size_t w = rows.front()->cols();
  nn::NdArray<T> out(nn::Shape{rows.size(), w});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    DRIVE_REQUIRE(rows[i]->size() == w, "stack_rows: ragged rows");
    std::copy_n(rows[i]->data(), w, out.data() + i * w);
  }
  return out;
}

}  // namespace

template <typename T>
Hidden<T> Hidden<T>::row(std::size_t i) const {
  return {take_row(h_a, i), take_row(c_a, i), take_row(h_f, i), take_row(c_f, i)};
}

template <typename T>
Hidden<T> Hidden<T>::stack(const std::vector<const Hidden*>& rows) {
  auto gather = [&](auto member) {
    std::vector<const nn::NdArray<T>*> parts;
    for (const auto* r : rows) parts.push_back(&(r->*member));
    return stack_rows(parts);
  };
  return {gather(&Hidden::h_a), gather(&Hidden::c_a), gather(&Hidden::h_f), gather(&Hidden::c_f)};
}

template <typename T>
Hidden<T> PolicyOutput<T>::next_hidden() const {
  Hidden<T> h;
  h.h_a = a.h.value();
  h.c_a = a.c.value();
  if (f) {
    h.h_f = f->h.value();
    h.c_f = f->c.value();
  }
  return h;
}

// ---------------------------------------------------------------- scaling

ScaledAction scale_action(std::span<const double> raw) {
  DRIVE_REQUIRE(raw.size() == 1 || raw.size() == 3, "scale_action expects 1 or 3 raw values");
  ScaledAction out;
  out.score = std::clamp(0.5 * (raw[0] + 1.0), 0.0, 1.0);
  if (raw.size() == 3) {
    out.fixation.x = std::clamp(0.5 * (raw[1] + 1.0), 0.0, 1.0);
    out.fixation.y = std::clamp(0.5 * (raw[2] + 1.0), 0.0, 1.0);
  }
  return out;
}

template <typename T>
ScaledAction scale_action_row(const nn::NdArray<T>& raw, std::size_t row) {
  const std::size_t k = raw.cols();
  double v[3] = {0, 0, 0};
  for (std::size_t i = 0; i < k && i < 3; ++i) v[i] = static_cast<double>(raw.at(row, i));
  return scale_action(std::span<const double>(v, k));
}

// ---------------------------------------------------------------- networks

template <typename T>
PolicyBranch<T>::PolicyBranch(std::size_t in, std::size_t hidden, std::size_t lstm_width, std::size_t k,
                              nn::Rng& rng)
    : fc1(in, hidden, rng),
      fc2(hidden, hidden, rng),
      lstm(hidden, lstm_width, rng),
      mean_head(lstm_width, k, rng),
      log_std_head(lstm_width, k, rng) {}

template <typename T>
BranchOutput<T> PolicyBranch<T>::operator()(const Var<T>& z, const Var<T>& h, const Var<T>& c) const {
  const auto x = fc2(fc1(z, nn::Activation::relu), nn::Activation::relu);
  const auto next = lstm(x, h, c);
  return {mean_head(next.h), log_std_head(next.h), next.h, next.c};
}

template <typename T>
void PolicyBranch<T>::collect(nn::ParamList<T>& out, const std::string& prefix) const {
  fc1.collect(out, prefix + ".fc1");
  fc2.collect(out, prefix + ".fc2");
  lstm.collect(out, prefix + ".lstm");
  mean_head.collect(out, prefix + ".mean");
  log_std_head.collect(out, prefix + ".log_std");
}

template <typename T>
Critic<T>::Critic(std::size_t in, std::size_t hidden, nn::Rng& rng)
    : l1(in, hidden, rng), l2(hidden, hidden, rng), out(hidden, 1, rng) {}

template <typename T>
Var<T> Critic<T>::operator()(const Var<T>& z, const Var<T>& action) const {
  const auto x = nn::concat_cols<T>({z, action});
  return out(l2(l1(x, nn::Activation::relu), nn::Activation::relu));
}

template <typename T>
void Critic<T>::collect(nn::ParamList<T>& o, const std::string& prefix) const {
  l1.collect(o, prefix + ".l1");
  l2.collect(o, prefix + ".l2");
  out.collect(o, prefix + ".out");
}

// ---------------------------------------------------------------- agent

template <typename T>
Agent<T>::Agent(const AgentConfig& cfg, nn::Rng& rng)
    : config_(cfg),
      enc1_(cfg.state_dim, cfg.encoder_hidden, rng),
      enc2_(cfg.encoder_hidden, cfg.encoder_hidden, rng),
      enc3_(cfg.encoder_hidden, cfg.latent_dim, rng),
      dec1_(cfg.latent_dim, cfg.encoder_hidden, rng),
      dec2_(cfg.encoder_hidden, cfg.encoder_hidden, rng),
      dec3_(cfg.encoder_hidden, cfg.state_dim, rng),
      branch_a_(cfg.latent_dim, cfg.policy_hidden, cfg.lstm_hidden, 1, rng),
      q1_(cfg.latent_dim + cfg.action_dim(), cfg.critic_hidden, rng),
      q2_(cfg.latent_dim + cfg.action_dim(), cfg.critic_hidden, rng),
      q1_target_(cfg.latent_dim + cfg.action_dim(), cfg.critic_hidden, rng),
      q2_target_(cfg.latent_dim + cfg.action_dim(), cfg.critic_hidden, rng) {
  if (cfg.fixation) branch_f_ = PolicyBranch<T>(cfg.latent_dim, cfg.policy_hidden, cfg.lstm_hidden, 2, rng);
  nn::copy_values(critic_params(), target_params());
  nn::set_requires_grad(target_params(), false);
}

template <typename T>
Var<T> Agent<T>::encode(const Var<T>& s) const {
  DRIVE_REQUIRE(s.value().cols() == config_.state_dim, "encode: state width mismatch");
  return enc3_(enc2_(enc1_(s, nn::Activation::relu), nn::Activation::relu));
}

template <typename T>
Var<T> Agent<T>::decode(const Var<T>& z) const {
  return dec3_(dec2_(dec1_(z, nn::Activation::relu), nn::Activation::relu));
}

template <typename T>
PolicyOutput<T> Agent<T>::policy_forward(const Var<T>& z, const Hidden<T>& hidden) const {
  DRIVE_REQUIRE(hidden.h_a.cols() == config_.lstm_hidden, "policy_forward: hidden width mismatch");
  PolicyOutput<T> out;
  out.a = branch_a_(z, nn::constant(hidden.h_a), nn::constant(hidden.c_a));
  if (config_.fixation) {
    DRIVE_REQUIRE(hidden.h_f.cols() == config_.lstm_hidden, "policy_forward: fixation hidden missing");
    out.f = branch_f_(z, nn::constant(hidden.h_f), nn::constant(hidden.c_f));
  }
  return out;
}

template <typename T>
SampledAction<T> Agent<T>::sample(const PolicyOutput<T>& out, const nn::NdArray<T>& noise) const {
  const std::size_t n = out.a.mean.value().rows();
  DRIVE_REQUIRE(noise.rows() == n && noise.cols() == config_.action_dim(), "sample: noise shape mismatch");
  nn::NdArray<T> na(nn::Shape{n, 1});
  for (std::size_t i = 0; i < n; ++i) na[i] = noise.at(i, 0);
  const auto sa = nn::tanh_gaussian(out.a.mean, out.a.log_std, na);
  SampledAction<T> s;
  s.log_prob_a = sa.log_prob;
  if (!out.f) {
    s.raw = sa.action;
    s.log_prob = sa.log_prob;
    return s;
  }
  nn::NdArray<T> nf(nn::Shape{n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    nf.at(i, 0) = noise.at(i, 1);
    nf.at(i, 1) = noise.at(i, 2);
  }
  const auto sf = nn::tanh_gaussian(out.f->mean, out.f->log_std, nf);
  s.log_prob_f = sf.log_prob;
  s.raw = nn::concat_cols<T>({sa.action, sf.action});
  s.log_prob = nn::add(sa.log_prob, sf.log_prob);
  return s;
}

template <typename T>
Var<T> Agent<T>::deterministic(const PolicyOutput<T>& out) const {
  if (!out.f) return nn::tanh(out.a.mean);
  return nn::concat_cols<T>({nn::tanh(out.a.mean), nn::tanh(out.f->mean)});
}

template <typename T>
std::pair<Var<T>, Var<T>> Agent<T>::q_values(const Var<T>& z, const Var<T>& raw_action, CriticSet which) const {
  DRIVE_REQUIRE(raw_action.value().cols() == config_.action_dim(), "q_values: action width mismatch");
  if (which == CriticSet::online) return {q1_(z, raw_action), q2_(z, raw_action)};
  return {q1_target_(z, raw_action), q2_target_(z, raw_action)};
}

template <typename T>
void Agent<T>::soft_update(double tau) {
  DRIVE_REQUIRE(tau > 0.0 && tau <= 1.0, "soft_update: tau must lie in (0, 1]");
  const auto online = critic_params();
  const auto target = target_params();
  for (std::size_t i = 0; i < online.size(); ++i) {
    auto dst = target[i].var;
    if (tau == 1.0) {
      dst.value_mut() = online[i].var.value();
      continue;
    }
    dst.value_mut().matrix() = static_cast<T>(tau) * online[i].var.value().matrix() +
                               static_cast<T>(1.0 - tau) * dst.value().matrix();
  }
}

template <typename T>
nn::ParamList<T> Agent<T>::encoder_params() const {
  nn::ParamList<T> p;
  enc1_.collect(p, "encoder.l1");
  enc2_.collect(p, "encoder.l2");
  enc3_.collect(p, "encoder.l3");
  return p;
}

template <typename T>
nn::ParamList<T> Agent<T>::decoder_params() const {
  nn::ParamList<T> p;
  dec1_.collect(p, "decoder.l1");
  dec2_.collect(p, "decoder.l2");
  dec3_.collect(p, "decoder.l3");
  return p;
}

template <typename T>
nn::ParamList<T> Agent<T>::actor_a_params() const {
  nn::ParamList<T> p;
  branch_a_.collect(p, "actor_a");
  return p;
}

template <typename T>
nn::ParamList<T> Agent<T>::actor_f_params() const {
  nn::ParamList<T> p;
  if (config_.fixation) branch_f_.collect(p, "actor_f");
  return p;
}

template <typename T>
nn::ParamList<T> Agent<T>::actor_params() const {
  auto p = actor_a_params();
  const auto f = actor_f_params();
  p.insert(p.end(), f.begin(), f.end());
  return p;
}

template <typename T>
nn::ParamList<T> Agent<T>::critic_params() const {
  nn::ParamList<T> p;
  q1_.collect(p, "q1");
  q2_.collect(p, "q2");
  return p;
}

template <typename T>
nn::ParamList<T> Agent<T>::target_params() const {
  nn::ParamList<T> p;
  q1_target_.collect(p, "q1_target");
  q2_target_.collect(p, "q2_target");
  return p;
}

template <typename T>
nn::ParamList<T> Agent<T>::all_params() const {
  nn::ParamList<T> p = encoder_params();
  for (const auto& part : {decoder_params(), actor_params(), critic_params()}) p.insert(p.end(), part.begin(), part.end());
  return p;
}

template <typename T>
std::unique_ptr<Agent<T>> Agent<T>::clone() const {
  nn::Rng rng(0);
  auto copy = std::make_unique<Agent<T>>(config_, rng);
  nn::copy_values(all_params(), copy->all_params());
  nn::copy_values(target_params(), copy->target_params());
  copy->alpha_ = alpha_;
  return copy;
}

template <typename T>
void Agent<T>::save(nn::Checkpoint& ck) const {
  ck.put_params("agent", all_params());
  ck.put_params("agent", target_params());
  ck.put("agent.alpha", nn::NdArray<double>(nn::Shape{1}, alpha_));
  ck.meta()["agent"] = config_.to_json();
}

template <typename T>
void Agent<T>::load(const nn::Checkpoint& ck) {
  const auto cfg = AgentConfig::from_json(ck.meta().at("agent"));
  DRIVE_REQUIRE(cfg.to_json() == config_.to_json(), "checkpoint agent configuration does not match");
  ck.load_params("agent", all_params());
  ck.load_params("agent", target_params());
  alpha_ = ck.get<double>("agent.alpha")[0];
}

template struct Hidden<float>;
template struct Hidden<double>;
template struct PolicyOutput<float>;
template struct PolicyOutput<double>;
template ScaledAction scale_action_row(const nn::NdArray<float>&, std::size_t);
template ScaledAction scale_action_row(const nn::NdArray<double>&, std::size_t);
template class PolicyBranch<float>;
template class PolicyBranch<double>;
template class Critic<float>;
template class Critic<double>;
template class Agent<float>;
template class Agent<double>;

}  // namespace drive::agent

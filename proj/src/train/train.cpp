#include "drive/train/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <thread>

#include <xmmintrin.h>
#include <pmmintrin.h>

#include "drive/log.hpp"

namespace drive::train {

namespace {

// Denormal weights and activations slow the GEMM kernels by an order of magnitude.
void flush_denormals() {
  _MM_SET_FLUSH_ZERO_MODE(_MM_FLUSH_ZERO_ON);
  _MM_SET_DENORMALS_ZERO_MODE(_MM_DENORMALS_ZERO_ON);
}

}  // namespace

namespace {

template <typename T>
nn::NdArray<T> as_row(const percept::ObservationState& s) {
  nn::NdArray<T> out(nn::Shape{1, s.size()});
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = static_cast<T>(s[i]);
  return out;
}

template <typename T>
nn::NdArray<T> flat(const nn::NdArray<T>& row) {
  nn::NdArray<T> out = row;
  out.reshape(nn::Shape{row.size()});
  return out;
}

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag)};
  return std::mt19937_64(seq);
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what + " during training");
}

}  // namespace

template <typename T>
Rollout<T> rollout_episode(const percept::PerceptEnv& env, const agent::Agent<T>& agent,
                           const reward::EpisodeAnnotation& annotation, const reward::RewardConfig& reward_cfg,
                           std::mt19937_64& rng, RolloutMode mode, bool keep_maps) {
  nn::NoGradGuard no_grad;
  const auto& acfg = agent.config();
  const int L = env.horizon();
  DRIVE_REQUIRE(annotation.horizon == L, "annotation horizon does not match the episode");

  Rollout<T> out;
  out.trace.annotation = annotation;
  if (mode == RolloutMode::train) out.transitions.reserve(static_cast<std::size_t>(L));
  std::normal_distribution<double> normal(0.0, 1.0);

  auto hidden = agent::Hidden<T>::zeros(1, acfg.lstm_hidden, acfg.fixation);
  percept::PreviousAction prev;
  percept::Diagnostics diag;
  auto s = as_row<T>(env.observe(0, prev, keep_maps ? &diag : nullptr));

  for (int t = 0; t < L; ++t) {
    const auto z = agent.encode(nn::constant(s));
    const auto policy = agent.policy_forward(z, hidden);
    nn::NdArray<T> raw;
    if (mode == RolloutMode::train) {
      nn::NdArray<T> noise(nn::Shape{1, acfg.action_dim()});
      for (auto& v : noise.values()) v = static_cast<T>(normal(rng));
      raw = agent.sample(policy, noise).raw.value();
    } else {
      raw = agent.deterministic(policy).value();
    }
    const auto act = agent::scale_action_row(raw, 0);
    const percept::FixationPoint* p_hat = acfg.fixation ? &act.fixation : nullptr;
    const double r = reward::step_reward(act.score, p_hat, annotation, t, reward_cfg);
    out.total_reward += r;

    out.trace.scores.push_back(act.score);
    out.trace.fixations.push_back(acfg.fixation ? act.fixation : percept::FixationPoint{0.5, 0.5});
    if (keep_maps) out.trace.fused.push_back(diag.s_fused);

    auto next_hidden = policy.next_hidden();
    prev.score = act.score;
    if (acfg.fixation) prev.fixation = act.fixation;
    const bool done = t == L - 1;
    nn::NdArray<T> s_next = done ? s : as_row<T>(env.observe(t + 1, prev, keep_maps ? &diag : nullptr));

    if (mode == RolloutMode::train) {
      Transition<T> tr;
      tr.s = flat(s);
      tr.action = flat(raw);
      tr.reward = r;
      tr.h_in = hidden;
      tr.h_out = next_hidden;
      tr.s_next = flat(s_next);
      tr.done = done;
      tr.t = t;
      tr.t_a = annotation.t_a;
      tr.label = annotation.label;
      if (const auto* gt = annotation.fixation_at(t)) tr.gt = *gt;
      out.transitions.push_back(std::move(tr));
    }
    hidden = std::move(next_hidden);
    s = std::move(s_next);
  }
  return out;
}

std::string format_log_row(const EpochLog& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", r.epoch, r.reward_mean, r.critic_loss,
                r.actor_loss_a, r.actor_loss_f, r.alpha, r.eval_auc, r.eval_tta);
  return buf;
}

agent::AgentConfig agent_config_for(const RunConfig& cfg, const percept::GridSpec& grid) {
  agent::AgentConfig a;
  a.state_dim = 2 * grid.channels;
  a.fixation = !cfg.percept.no_fixation;
  return a;
}

UpdateConfig update_config_for(const RunConfig& cfg) {
  const auto& t = cfg.trainer;
  UpdateConfig u;
  u.lr = t.lr;
  u.lr_alpha = t.lr_alpha;
  u.gamma = t.gamma;
  u.tau = t.tau;
  u.alpha_min = t.alpha_min;
  u.weight_decay = t.weight_decay;
  u.w1 = t.w1;
  u.w2 = t.w2;
  u.ws = t.ws;
  u.target_entropy = cfg.target_entropy();
  u.grad_clip = t.grad_clip;
  u.sl_only = t.sl_only;
  return u;
}

std::unique_ptr<percept::SaliencyModel> make_saliency(const RunConfig& cfg) {
  if (cfg.saliency == "oracle") {
    percept::GridSpec grid;
    grid.height = cfg.scene.height;
    grid.width = cfg.scene.width;
    return std::make_unique<percept::OracleSaliency>(grid);
  }
  if (cfg.saliency_checkpoint.empty()) throw ConfigError("saliency 'conv' needs saliency_checkpoint");
  auto model = percept::load_saliency(cfg.saliency_checkpoint);
  if (model->grid().height != cfg.scene.height || model->grid().width != cfg.scene.width)
    throw ConfigError("saliency checkpoint frame size does not match the scene");
  return model;
}

// ----------------------------------------------------------------- trainer

template <typename T>
Trainer<T>::Trainer(const RunConfig& cfg, const synth::Dataset& data, const percept::SaliencyModel& saliency)
    : cfg_(cfg),
      data_(&data),
      saliency_(&saliency),
      buffer_(cfg.trainer.buffer_capacity),
      rng_(derived_rng(cfg.seed, 0x7261696e)) {
  cfg_.validate();
  flush_denormals();
  if (data.train.empty()) throw ConfigError("training split is empty");
  if (data.test.empty()) throw ConfigError("test split is empty");

  auto build = [&](const std::vector<synth::Episode>& eps, auto& marks, auto& envs) {
    marks.resize(eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i) marks[i] = eps[i].marks();
    for (std::size_t i = 0; i < eps.size(); ++i)
      envs.push_back(std::make_unique<percept::PerceptEnv>(saliency, cfg_.percept, eps[i].frames, marks[i]));
  };
  build(data.train, train_marks_, train_envs_);
  build(data.test, test_marks_, test_envs_);

  auto init_rng = derived_rng(cfg.seed, 0x6167656e);
  agent_ = std::make_unique<agent::Agent<T>>(agent_config_for(cfg_, saliency.grid()), init_rng);
  agent_->set_alpha(cfg_.trainer.alpha_init);
  learner_ = std::make_unique<SacLearner<T>>(*agent_, update_config_for(cfg_), rng_());
}

template <typename T>
std::vector<Rollout<T>> Trainer<T>::collect(const std::vector<std::size_t>& episodes,
                                            const std::vector<std::uint64_t>& seeds) {
  std::vector<Rollout<T>> out(episodes.size());
  auto run = [&](const agent::Agent<T>& snapshot, std::size_t k) {
    std::mt19937_64 rng(seeds[k]);
    const auto& ep = data_->train[episodes[k]];
    out[k] = rollout_episode(*train_envs_[episodes[k]], snapshot, ep.annotation, cfg_.reward, rng,
                             RolloutMode::train);
  };
  const auto workers = static_cast<std::size_t>(std::max(1, cfg_.trainer.workers));
  if (workers == 1 || episodes.size() == 1) {
    for (std::size_t k = 0; k < episodes.size(); ++k) run(*agent_, k);
    return out;
  }
  // Workers read a private snapshot; results land in episode order.
  const auto snapshot = agent_->clone();
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, episodes.size()); ++w)
    pool.emplace_back([&, w] {
      flush_denormals();
      for (std::size_t k = w; k < episodes.size(); k += workers) run(*snapshot, k);
    });
  for (auto& th : pool) th.join();
  return out;
}

template <typename T>
void Trainer<T>::update_step(double& critic_sum, double& actor_a_sum, double& actor_f_sum, int& n_critic,
                             int& n_actor) {
  const auto n = static_cast<std::size_t>(cfg_.trainer.batch_size);
  auto& lrng = learner_->rng();
  const int critic_per_actor =
      std::max(1, cfg_.trainer.critic_updates / std::max(1, cfg_.trainer.actor_updates));
  int critic_left = cfg_.trainer.critic_updates, actor_left = cfg_.trainer.actor_updates;
  // [c, c, a, c, c, a] for the default 4/2 split.
  while (critic_left > 0 || actor_left > 0) {
    for (int i = 0; i < critic_per_actor && critic_left > 0; ++i, --critic_left) {
      critic_sum += learner_->critic_update(buffer_.sample(n, lrng));
      ++n_critic;
    }
    if (actor_left > 0) {
      const auto [ja, jf] = learner_->actor_update(buffer_.sample(n, lrng));
      actor_a_sum += ja;
      actor_f_sum += jf;
      ++n_actor;
      --actor_left;
    }
  }
  learner_->alpha_update(buffer_.sample(n, lrng));
  agent_->soft_update(cfg_.trainer.tau);
  if (!cfg_.trainer.no_rae) learner_->rae_update(buffer_.sample(n, lrng));
}

template <typename T>
EpochLog Trainer<T>::run_epoch() {
  flush_denormals();
  std::vector<std::size_t> order(data_->train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng_);

  const auto vb = static_cast<std::size_t>(cfg_.trainer.video_batch);
  double reward_sum = 0.0, critic_sum = 0.0, actor_a_sum = 0.0, actor_f_sum = 0.0;
  int n_critic = 0, n_actor = 0;
  for (std::size_t start = 0; start < order.size(); start += vb) {
    std::vector<std::size_t> chunk(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + vb)));
    std::vector<std::uint64_t> seeds(chunk.size());
    for (auto& s : seeds) s = rng_();
    auto rollouts = collect(chunk, seeds);
    int steps = 0;
    for (auto& r : rollouts) {
      reward_sum += r.total_reward;
      steps = std::max(steps, static_cast<int>(r.transitions.size()));
      for (auto& tr : r.transitions) buffer_.push(std::move(tr));
    }
    if (buffer_.size() < static_cast<std::size_t>(cfg_.trainer.warmup)) continue;
    for (int t = 0; t < steps; ++t) update_step(critic_sum, actor_a_sum, actor_f_sum, n_critic, n_actor);
  }

  ++epoch_;
  EpochLog row;
  row.epoch = epoch_;
  row.reward_mean = reward_sum / static_cast<double>(order.size());
  row.critic_loss = n_critic ? critic_sum / n_critic : 0.0;
  row.actor_loss_a = n_actor ? actor_a_sum / n_actor : 0.0;
  row.actor_loss_f = n_actor && agent_->config().fixation ? actor_f_sum / n_actor : 0.0;
  row.alpha = agent_->alpha();
  check_finite(row.critic_loss, "critic loss");
  check_finite(row.actor_loss_a, "actor loss");
  check_finite(row.actor_loss_f, "fixation loss");

  const auto traces = evaluate_test();
  row.eval_auc = eval::video_auc(traces, eval::parse_aggregate(cfg_.video_aggregate));
  row.eval_tta = eval::mean_tta(traces, cfg_.reward.a0, cfg_.tta_window);
  return row;
}

template <typename T>
std::vector<eval::PredictionTrace> Trainer<T>::evaluate(const std::vector<synth::Episode>& episodes,
                                                        percept::Intervention mode, bool keep_maps) const {
  flush_denormals();
  const bool is_test = &episodes == &data_->test;
  std::vector<eval::PredictionTrace> out;
  out.reserve(episodes.size());
  std::mt19937_64 unused(0);
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    std::optional<percept::PerceptEnv> local;
    std::vector<std::vector<percept::ObjectMark>> marks;
    const percept::PerceptEnv* env = nullptr;
    if (is_test) {
      env = test_envs_[i].get();
    } else {
      marks = episodes[i].marks();
      local.emplace(*saliency_, cfg_.percept, episodes[i].frames, marks);
      env = &*local;
    }
    if (mode != env->config().intervention) {
      if (!local) local.emplace(*env);
      local->set_intervention(mode);
      env = &*local;
    }
    out.push_back(rollout_episode(*env, *agent_, episodes[i].annotation, cfg_.reward, unused, RolloutMode::eval,
                                  keep_maps)
                      .trace);
  }
  return out;
}

template <typename T>
std::vector<eval::PredictionTrace> Trainer<T>::evaluate_test(percept::Intervention mode) const {
  return evaluate(data_->test, mode);
}

template <typename T>
nn::Checkpoint Trainer<T>::checkpoint() const {
  nn::Checkpoint ck;
  agent_->save(ck);
  learner_->save(ck);
  ck.put_int("trainer.epoch", epoch_);
  ck.meta()["config"] = cfg_.to_json();
  ck.meta()["config_hash"] = cfg_.hash();
  ck.meta()["precision"] = std::is_same_v<T, float> ? "f32" : "f64";
  return ck;
}

template <typename T>
void Trainer<T>::load(const nn::Checkpoint& ck) {
  agent_->load(ck);
  learner_->load(ck);
  epoch_ = static_cast<int>(ck.get_int("trainer.epoch"));
}

template <typename T>
std::vector<EpochLog> Trainer<T>::train(const std::filesystem::path& out,
                                        const std::function<void(const EpochLog&)>& on_epoch) {
  std::vector<EpochLog> log;
  std::string csv = std::string(kTrainLogHeader) + "\n";
  double best = -1.0;
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    io::write_text_atomic(out / "config.json", cfg_.to_json().dump(2) + "\n");
  }
  while (epoch_ < cfg_.trainer.epochs) {
    const auto row = run_epoch();
    log.push_back(row);
    csv += format_log_row(row) + "\n";
    log::info("epoch {} reward {:.3f} auc {:.3f} tta {:.2f} alpha {:.4g}", row.epoch, row.reward_mean, row.eval_auc,
              row.eval_tta, row.alpha);
    if (!out.empty()) {
      io::write_text_atomic(out / "train_log.csv", csv);
      const bool periodic = cfg_.trainer.checkpoint_every > 0 && epoch_ % cfg_.trainer.checkpoint_every == 0;
      if (periodic || row.eval_auc > best || epoch_ == cfg_.trainer.epochs) {
        const auto ck = checkpoint();
        if (periodic) ck.save(out / ("epoch_" + std::to_string(epoch_) + ".ckpt"));
        if (row.eval_auc > best) ck.save(out / "best.ckpt");
        if (epoch_ == cfg_.trainer.epochs) ck.save(out / "final.ckpt");
      }
    }
    best = std::max(best, row.eval_auc);
    if (on_epoch) on_epoch(row);
  }
  return log;
}

template Rollout<float> rollout_episode(const percept::PerceptEnv&, const agent::Agent<float>&,
                                        const reward::EpisodeAnnotation&, const reward::RewardConfig&,
                                        std::mt19937_64&, RolloutMode, bool);
template Rollout<double> rollout_episode(const percept::PerceptEnv&, const agent::Agent<double>&,
                                         const reward::EpisodeAnnotation&, const reward::RewardConfig&,
                                         std::mt19937_64&, RolloutMode, bool);
template class Trainer<float>;
template class Trainer<double>;

}  // namespace drive::train

#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "drive/nn/gradcheck.hpp"
#include "drive/train/train.hpp"
#include "scalar_oracle.hpp"
#include "train_fixtures.hpp"

using namespace drive;
using namespace drive::train;
using drive::testing::batch_of;
using drive::testing::normal_array;
using drive::testing::random_transitions;
using drive::testing::tiny_agent_config;
using nn::NdArray;

namespace {

std::vector<NdArray<double>> snapshot(const nn::ParamList<double>& params) {
  std::vector<NdArray<double>> out;
  for (const auto& p : params) out.push_back(p.var.value());
  return out;
}

bool unchanged(const nn::ParamList<double>& params, const std::vector<NdArray<double>>& before) {
  for (std::size_t i = 0; i < params.size(); ++i)
    if (!(params[i].var.value() == before[i])) return false;
  return true;
}

RunConfig tiny_run(std::uint64_t seed = 3) {
  RunConfig cfg;
  cfg.n_train = 4;
  cfg.n_test = 4;
  cfg.scene.horizon = 12;
  cfg.scene.cue_lead = 4;
  cfg.trainer.epochs = 2;
  cfg.trainer.video_batch = 2;
  cfg.trainer.batch_size = 8;
  cfg.trainer.warmup = 8;
  cfg.trainer.buffer_capacity = 1000;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("replay buffer capacity, eviction and ordering") {
  ReplayBuffer<double> buf(5);
  const auto c = tiny_agent_config();
  std::mt19937_64 rng(1);
  auto items = random_transitions<double>(c, 8, rng);
  for (int i = 0; i < 8; ++i) {
    items[i].t = i;
    buf.push(items[i]);
    CHECK(buf.size() <= 5);
  }
  CHECK(buf.size() == 5);
  CHECK(buf.total_pushed() == 8);
  for (std::size_t i = 0; i < 5; ++i) CHECK(buf.at(i).t == static_cast<int>(i + 3));
}

TEST_CASE("replay sampling is uniform over occupancy") {
  ReplayBuffer<double> buf(100);
  const auto c = tiny_agent_config();
  std::mt19937_64 rng(2);
  auto items = random_transitions<double>(c, 10, rng);
  for (int i = 0; i < 10; ++i) {
    items[i].reward = i;
    buf.push(items[i]);
  }
  std::vector<int> counts(10, 0);
  std::mt19937_64 srng(3);
  for (int k = 0; k < 2000; ++k) {
    const auto b = buf.sample(10, srng);
    for (std::size_t i = 0; i < b.size(); ++i) ++counts[static_cast<int>(b.reward[i])];
  }
  // Chi-square with 9 degrees of freedom; 27.9 is the 0.1% tail.
  double chi = 0.0;
  for (const int n : counts) chi += (n - 2000.0) * (n - 2000.0) / 2000.0;
  CHECK(chi < 27.9);
}

TEST_CASE("batch carries the supervision payload") {
  const auto c = tiny_agent_config();
  std::mt19937_64 rng(4);
  const auto items = random_transitions<double>(c, 12, rng);
  const auto b = batch_of(items);
  for (std::size_t i = 0; i < items.size(); ++i) {
    CHECK(b.done[i] == (items[i].done ? 1.0 : 0.0));
    CHECK(b.label[i] == items[i].label);
    CHECK(b.bce_weight[i] == reward::exp_bce_weight(items[i].t, items[i].label, items[i].t_a));
    CHECK(b.gt_mask[i] == (items[i].gt ? 1.0 : 0.0));
  }
}

TEST_CASE("critic target degenerate cases and scalar oracle") {
  const auto c = tiny_agent_config();
  nn::Rng init(5);
  agent::Agent<double> agent(c, init);
  std::mt19937_64 rng(6);
  auto items = random_transitions<double>(c, 4, rng);
  items[0].done = true;
  const auto b = batch_of(items);
  const auto noise = normal_array<double>(nn::Shape{4, 3}, rng);
  const auto y = critic_target(b, agent, 0.2, 0.99, noise);
  CHECK(y[0] == items[0].reward);
  const auto y0 = critic_target(b, agent, 0.2, 0.0, noise);
  for (std::size_t i = 0; i < 4; ++i) CHECK(y0[i] == items[i].reward);

  const drive::testing::ScalarAgent oracle(agent);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& tr = items[i];
    const auto v = [](const NdArray<double>& a) { return std::vector<double>(a.values().begin(), a.values().end()); };
    const double expect = oracle.critic_target(v(tr.s_next), v(tr.h_out.h_a), v(tr.h_out.c_a), v(tr.h_out.h_f),
                                               v(tr.h_out.c_f), &noise.at(i, 0), tr.reward, tr.done, 0.2, 0.99);
    CHECK(std::abs(y[i] - expect) <= 1e-9);
  }
}

TEST_CASE("critic target is isolated from the online critics") {
  const auto c = tiny_agent_config();
  nn::Rng init(7);
  agent::Agent<double> agent(c, init);
  std::mt19937_64 rng(8);
  const auto b = batch_of(random_transitions<double>(c, 6, rng));
  const auto noise = normal_array<double>(nn::Shape{6, 3}, rng);
  const auto y1 = critic_target(b, agent, 0.2, 0.99, noise);
  for (auto p : agent.target_params()) p.var.value_mut()[0] += 0.5;
  const auto y2 = critic_target(b, agent, 0.2, 0.99, noise);
  CHECK(y1 != y2);
  // The online critics see the target only as a constant.
  nn::zero_grad(agent.critic_params());
  nn::backward(critic_loss(b, agent, y2));
  const auto before = snapshot(agent.critic_params());
  for (auto p : agent.target_params()) p.var.value_mut()[0] += 0.5;
  nn::zero_grad(agent.critic_params());
  const auto y3 = critic_target(b, agent, 0.2, 0.99, noise);
  const auto l = critic_loss(b, agent, y3);
  CHECK_FALSE(nn::constant(y3).requires_grad());
  CHECK(unchanged(agent.critic_params(), before));
  for (const auto& p : agent.target_params()) CHECK_FALSE(p.var.requires_grad());
  (void)l;
}

TEST_CASE("critic loss is zero when Q equals the target") {
  const auto c = tiny_agent_config();
  nn::Rng init(9);
  agent::Agent<double> agent(c, init);
  std::mt19937_64 rng(10);
  const auto b = batch_of(random_transitions<double>(c, 5, rng));
  const auto z = agent.encode(nn::constant(b.s));
  const auto q = agent.q_values(z, nn::constant(b.action), agent::CriticSet::online).first.value();
  // Make q2 an exact copy of q1.
  const auto p = agent.critic_params();
  const std::size_t half = p.size() / 2;
  for (std::size_t i = 0; i < half; ++i) {
    auto dst = p[half + i].var;
    dst.value_mut() = p[i].var.value();
  }
  CHECK(critic_loss(b, agent, q).item() == 0.0);
}

TEST_CASE("critic loss falls on a frozen batch") {
  const auto c = tiny_agent_config();
  nn::Rng init(11);
  agent::Agent<double> agent(c, init);
  UpdateConfig cfg;
  cfg.lr = 1e-2;
  SacLearner<double> learner(agent, cfg, 12);
  std::mt19937_64 rng(13);
  const auto b = batch_of(random_transitions<double>(c, 16, rng));
  std::vector<double> losses;
  for (int k = 0; k < 100; ++k) losses.push_back(learner.critic_update(b));
  auto window = [&](int from) {
    double s = 0;
    for (int i = from; i < from + 10; ++i) s += losses[i];
    return s / 10;
  };
  CHECK(window(90) < window(0));
  CHECK(window(90) < 0.5 * window(0));
}

TEST_CASE("update routing: which parameters each update touches") {
  const auto c = tiny_agent_config();
  nn::Rng init(14);
  agent::Agent<double> agent(c, init);
  SacLearner<double> learner(agent, UpdateConfig{}, 15);
  std::mt19937_64 rng(16);
  const auto b = batch_of(random_transitions<double>(c, 8, rng));

  auto enc = snapshot(agent.encoder_params()), dec = snapshot(agent.decoder_params());
  auto act = snapshot(agent.actor_params()), cri = snapshot(agent.critic_params());
  auto tgt = snapshot(agent.target_params());
  learner.critic_update(b);
  CHECK_FALSE(unchanged(agent.encoder_params(), enc));
  CHECK_FALSE(unchanged(agent.critic_params(), cri));
  CHECK(unchanged(agent.decoder_params(), dec));
  CHECK(unchanged(agent.actor_params(), act));
  CHECK(unchanged(agent.target_params(), tgt));

  enc = snapshot(agent.encoder_params());
  cri = snapshot(agent.critic_params());
  learner.actor_update(b);
  CHECK_FALSE(unchanged(agent.actor_a_params(), act));
  CHECK(unchanged(agent.encoder_params(), enc));
  CHECK(unchanged(agent.critic_params(), cri));
  CHECK(unchanged(agent.target_params(), tgt));
  for (const auto& p : agent.critic_params()) CHECK(p.var.requires_grad());

  act = snapshot(agent.actor_params());
  learner.rae_update(b);
  CHECK_FALSE(unchanged(agent.decoder_params(), dec));
  CHECK_FALSE(unchanged(agent.encoder_params(), enc));
  CHECK(unchanged(agent.actor_params(), act));
  CHECK(unchanged(agent.critic_params(), cri));
}

TEST_CASE("actor loss decomposes into its terms") {
  const auto c = tiny_agent_config();
  nn::Rng init(17);
  agent::Agent<double> agent(c, init);
  std::mt19937_64 rng(18);
  const auto items = random_transitions<double>(c, 10, rng);
  const auto b = batch_of(items);
  const auto noise = normal_array<double>(nn::Shape{10, 3}, rng);
  UpdateConfig cfg;
  const auto full = actor_loss(b, agent, 0.2, noise, cfg);
  cfg.sl_only = true;
  const auto sl = actor_loss(b, agent, 0.2, noise, cfg);

  // Scalar recomputation of the supervised terms from the sampled actions.
  const auto z = agent.encode(nn::constant(b.s));
  const auto s = agent.sample(agent.policy_forward(z, b.h_in), noise).raw.value();
  double bce = 0.0, fix = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const double score = 0.5 * (s.at(i, 0) + 1);
    bce += reward::exp_bce_loss(score, items[i].t, items[i].label, items[i].t_a);
    const percept::FixationPoint p{0.5 * (s.at(i, 1) + 1), 0.5 * (s.at(i, 2) + 1)};
    fix += reward::fixation_reg_loss(p, items[i].gt ? &*items[i].gt : nullptr, items[i].t, items[i].t_a);
  }
  bce /= items.size();
  fix /= items.size();
  CHECK(sl.j_a.item() == doctest::Approx(bce).epsilon(1e-12));
  CHECK(sl.j_f->item() == doctest::Approx(10.0 * fix).epsilon(1e-12));
  CHECK(full.j_a.item() == doctest::Approx(full.j_o.item() + bce).epsilon(1e-12));
  CHECK(full.j_f->item() == doctest::Approx(full.j_o.item() + 10.0 * fix).epsilon(1e-12));
  CHECK(full.total.item() == doctest::Approx(full.j_o.item() + bce + 10.0 * fix).epsilon(1e-12));
}

TEST_CASE("sl_only changes the loss but not the architecture") {
  RunConfig a = tiny_run(), b = tiny_run();
  b.trainer.sl_only = true;
  const auto grid = percept::GridSpec{};
  nn::Rng r1(1), r2(1);
  agent::Agent<float> x(agent_config_for(a, grid), r1), y(agent_config_for(b, grid), r2);
  const auto px = x.all_params(), py = y.all_params();
  REQUIRE(px.size() == py.size());
  for (std::size_t i = 0; i < px.size(); ++i) {
    CHECK(px[i].name == py[i].name);
    CHECK(px[i].var.shape() == py[i].var.shape());
  }
}

TEST_CASE("no-fixation actor loss has no fixation term") {
  const auto c = tiny_agent_config(false);
  nn::Rng init(19);
  agent::Agent<double> agent(c, init);
  std::mt19937_64 rng(20);
  const auto b = batch_of(random_transitions<double>(c, 6, rng));
  const auto L = actor_loss(b, agent, 0.2, normal_array<double>(nn::Shape{6, 1}, rng), UpdateConfig{});
  CHECK_FALSE(L.j_f.has_value());
  CHECK(L.total.item() == L.j_a.item());
}

TEST_CASE("temperature update: zero gradient and floor") {
  NdArray<double> lp(nn::Shape{4, 1});
  lp.fill(3.0);  // −log π − H0 = −3 + 3 = 0
  CHECK(alpha_gradient(lp, -3.0) == 0.0);
  CHECK(alpha_step(0.2, 0.0, 5e-5, 1e-4) == 0.2);
  CHECK(alpha_step(0.2, 1e6, 5e-5, 1e-4) == 1e-4);
  lp.fill(-10.0);  // high entropy drives α down
  CHECK(alpha_gradient(lp, -3.0) == 13.0);
}

TEST_CASE("rae reconstructs a fixed state set") {
  auto c = tiny_agent_config();
  c.state_dim = 8;
  c.latent_dim = 8;
  c.encoder_hidden = 16;
  nn::Rng init(21);
  agent::Agent<double> agent(c, init);
  UpdateConfig cfg;
  cfg.lr = 3e-3;
  SacLearner<double> learner(agent, cfg, 22);
  std::mt19937_64 rng(23);
  const auto b = batch_of(random_transitions<double>(c, 32, rng));
  double mean = 0.0, var = 0.0;
  for (const auto v : b.s.values()) mean += v;
  mean /= b.s.size();
  for (const auto v : b.s.values()) var += (v - mean) * (v - mean);
  var /= b.s.size();
  for (int k = 0; k < 3000; ++k) learner.rae_update(b);
  const auto recon = agent.decode(agent.encode(nn::constant(b.s))).value();
  double mse = 0.0;
  for (std::size_t i = 0; i < recon.size(); ++i) mse += (recon[i] - b.s[i]) * (recon[i] - b.s[i]);
  mse /= recon.size();
  CHECK(mse < 0.1 * var);
}

TEST_CASE("rollout: eval is deterministic, train records transitions") {
  const auto cfg = tiny_run();
  const auto data = synth::make_dataset(cfg.scene, 2, 2);
  const auto saliency = make_saliency(cfg);
  const auto& ep = data.train[0];
  const auto marks = ep.marks();
  percept::PerceptEnv env(*saliency, cfg.percept, ep.frames, marks);
  nn::Rng init(24);
  agent::Agent<float> agent(agent_config_for(cfg, saliency->grid()), init);
  std::mt19937_64 r1(1), r2(2);
  const auto e1 = rollout_episode(env, agent, ep.annotation, cfg.reward, r1, RolloutMode::eval);
  const auto e2 = rollout_episode(env, agent, ep.annotation, cfg.reward, r2, RolloutMode::eval);
  CHECK(e1.trace.scores == e2.trace.scores);
  CHECK(e1.transitions.empty());
  CHECK(e1.trace.scores.size() == 12);

  const auto t = rollout_episode(env, agent, ep.annotation, cfg.reward, r1, RolloutMode::train);
  REQUIRE(t.transitions.size() == 12);
  double total = 0.0;
  for (std::size_t i = 0; i < 12; ++i) {
    const auto& tr = t.transitions[i];
    CHECK(tr.done == (i == 11));
    CHECK(tr.t == static_cast<int>(i));
    total += tr.reward;
    const std::vector<double> raw(tr.action.values().begin(), tr.action.values().end());
    const auto a = agent::scale_action(raw);
    CHECK(tr.reward == reward::step_reward(a.score, &a.fixation, ep.annotation, tr.t, cfg.reward));
    if (i + 1 < 12) {
      CHECK(tr.s_next == t.transitions[i + 1].s);
      CHECK(tr.h_out == t.transitions[i + 1].h_in);
    }
  }
  CHECK(t.total_reward == doctest::Approx(total));
}

TEST_CASE("training is bit-reproducible and writes its artifacts") {
  const auto cfg = tiny_run();
  const auto data = synth::make_dataset(cfg.scene, cfg.n_train, cfg.n_test);
  const auto saliency = make_saliency(cfg);
  const auto dir = std::filesystem::temp_directory_path() / "drive_trainer_test";
  std::filesystem::remove_all(dir);
  Trainer<float> a(cfg, data, *saliency), b(cfg, data, *saliency);
  const auto la = a.train(dir / "a");
  const auto lb = b.train(dir / "b");
  REQUIRE(la.size() == 2);
  for (std::size_t i = 0; i < la.size(); ++i) CHECK(format_log_row(la[i]) == format_log_row(lb[i]));
  CHECK(io::read_text(dir / "a" / "train_log.csv") == io::read_text(dir / "b" / "train_log.csv"));
  CHECK(io::read_text(dir / "a" / "train_log.csv").rfind(kTrainLogHeader, 0) == 0);
  CHECK(std::filesystem::exists(dir / "a" / "best.ckpt"));
  CHECK(std::filesystem::exists(dir / "a" / "final.ckpt"));
  CHECK(std::filesystem::exists(dir / "a" / "config.json"));
  for (const auto& row : la) CHECK(row.alpha >= cfg.trainer.alpha_min);

  // Restoring the final checkpoint reproduces the evaluation.
  Trainer<float> c(cfg, data, *saliency);
  c.load(nn::Checkpoint::load(dir / "a" / "final.ckpt"));
  CHECK(c.epoch() == 2);
  CHECK(c.evaluate_test().at(1).scores == a.evaluate_test().at(1).scores);

  // Parallel rollouts land in the same order as sequential ones.
  auto par = cfg;
  par.trainer.workers = 2;
  Trainer<float> p(par, data, *saliency);
  const auto lp = p.train();
  for (std::size_t i = 0; i < la.size(); ++i) CHECK(format_log_row(la[i]) == format_log_row(lp[i]));
}

TEST_CASE("trainer rejects empty data") {
  const auto cfg = tiny_run();
  synth::Dataset empty;
  const auto saliency = make_saliency(cfg);
  CHECK_THROWS_AS(Trainer<float>(cfg, empty, *saliency), ConfigError);
}

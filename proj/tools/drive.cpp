// drive: data generation, saliency pretraining, training, evaluation and
// attention interventions on synthetic driving episodes.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "drive/eval/intervention.hpp"
#include "drive/log.hpp"
#include "drive/percept/saliency.hpp"
#include "drive/synth/episode.hpp"
#include "drive/train/train.hpp"

namespace fs = std::filesystem;
using namespace drive;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> workers;
  std::string precision;
  std::string data;
  std::string checkpoint;
  std::string intervention = "none";
  bool no_fixation = false, no_rae = false, sl_only = false, no_bottom_up = false, no_top_down = false;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config_path, "JSON config file");
  cmd->add_option("--set", o.overrides, "key=value override, repeatable");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--data", o.data, "dataset manifest (default: generate in memory)");
}

void add_training(CLI::App* cmd, Options& o) {
  cmd->add_option("--workers", o.workers, "parallel rollout workers");
  cmd->add_option("--precision", o.precision, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
  cmd->add_flag("--no_fixation", o.no_fixation, "drop the fixation branch");
  cmd->add_flag("--no_rae", o.no_rae, "skip the autoencoder update");
  cmd->add_flag("--sl_only", o.sl_only, "supervised losses only");
  cmd->add_flag("--no_bottom_up", o.no_bottom_up, "use top-down attention alone");
  cmd->add_flag("--no_top_down", o.no_top_down, "use bottom-up attention alone");
}

train::RunConfig resolve(const Options& o, const nlohmann::json* base = nullptr) {
  train::RunConfig cfg;
  if (base) cfg.apply(*base);
  if (!o.config_path.empty()) cfg.apply(nlohmann::json::parse(io::read_text(o.config_path)));
  for (const auto& kv : o.overrides) cfg.apply_override(kv);
  if (o.seed) cfg.seed = *o.seed;
  if (o.workers) cfg.trainer.workers = *o.workers;
  if (!o.precision.empty()) cfg.trainer.precision = o.precision;
  if (o.no_fixation) cfg.percept.no_fixation = true;
  if (o.no_rae) cfg.trainer.no_rae = true;
  if (o.sl_only) cfg.trainer.sl_only = true;
  if (o.no_bottom_up) cfg.percept.no_bottom_up = true;
  if (o.no_top_down) cfg.percept.no_top_down = true;
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (!o.data.empty()) cfg.data_dir = o.data;
  cfg.validate();
  return cfg;
}

synth::Dataset dataset_for(const train::RunConfig& cfg) {
  if (cfg.data_dir.empty()) {
    auto d = synth::make_dataset(cfg.scene, cfg.n_train, cfg.n_test);
    d.fps = cfg.fps;
    return d;
  }
  fs::path p = cfg.data_dir;
  if (fs::is_directory(p)) p /= "manifest.txt";
  return synth::load_dataset(p);
}

void snapshot(const train::RunConfig& cfg) {
  if (cfg.out_dir.empty()) return;
  fs::create_directories(cfg.out_dir);
  io::write_text_atomic(fs::path(cfg.out_dir) / "config.json", cfg.to_json().dump(2) + "\n");
}

int gen_data(const Options& o) {
  auto cfg = resolve(o);
  if (cfg.out_dir.empty()) throw ConfigError("gen-data needs --out");
  auto m = synth::generate_dataset(cfg.scene, cfg.n_train, cfg.n_test, cfg.out_dir);
  snapshot(cfg);
  log::info("wrote {} episodes to {}", m.entries.size(), cfg.out_dir);
  return 0;
}

int pretrain(const Options& o) {
  auto cfg = resolve(o);
  if (cfg.out_dir.empty()) throw ConfigError("pretrain-saliency needs --out");
  const auto data = dataset_for(cfg);
  std::vector<percept::PretrainSample> samples;
  for (const auto& ep : data.train) {
    if (ep.oracle_maps.size() != ep.frames.size()) throw ConfigError("training episodes carry no oracle maps");
    for (std::size_t t = 0; t < ep.frames.size(); ++t) samples.push_back({&ep.frames[t], &ep.oracle_maps[t]});
  }
  percept::GridSpec grid;
  grid.height = cfg.scene.height;
  grid.width = cfg.scene.width;
  nn::Rng rng(cfg.seed);
  percept::ConvSaliency model(grid, rng);
  const auto losses = percept::pretrain_saliency(model, samples, {cfg.pretrain_epochs, 1e-3, cfg.seed});
  for (std::size_t e = 0; e < losses.size(); ++e) log::info("saliency epoch {} loss {:.5f}", e + 1, losses[e]);
  nn::Checkpoint ck;
  model.save(ck);
  snapshot(cfg);
  ck.save(fs::path(cfg.out_dir) / "saliency.ckpt");
  return 0;
}

template <typename T>
int train_run(const train::RunConfig& cfg) {
  const auto data = dataset_for(cfg);
  const auto saliency = train::make_saliency(cfg);
  train::Trainer<T> trainer(cfg, data, *saliency);
  trainer.train(cfg.out_dir);
  return 0;
}

// Rebuilds the trainer recorded in a checkpoint and restores its weights.
template <typename T, typename Fn>
int with_checkpoint(const train::RunConfig& cfg, const nn::Checkpoint& ck, Fn&& fn) {
  const auto data = dataset_for(cfg);
  const auto saliency = train::make_saliency(cfg);
  train::Trainer<T> trainer(cfg, data, *saliency);
  trainer.load(ck);
  return fn(trainer);
}

template <typename T>
int eval_run(const train::RunConfig& cfg, const nn::Checkpoint& ck, percept::Intervention mode) {
  return with_checkpoint<T>(cfg, ck, [&](const train::Trainer<T>& trainer) {
    const auto summary = eval::evaluate_run(trainer, mode).to_json().dump(2);
    std::cout << summary << "\n";
    if (!cfg.out_dir.empty()) io::write_text_atomic(fs::path(cfg.out_dir) / "eval.json", summary + "\n");
    return 0;
  });
}

template <typename T>
int intervene_run(const train::RunConfig& cfg, const nn::Checkpoint& ck) {
  return with_checkpoint<T>(cfg, ck, [&](const train::Trainer<T>& trainer) {
    const auto csv = eval::run_intervention(trainer).to_csv();
    std::cout << csv;
    if (!cfg.out_dir.empty()) io::write_text_atomic(fs::path(cfg.out_dir) / "intervention.csv", csv);
    return 0;
  });
}

int from_checkpoint(const Options& o, bool intervene) {
  if (o.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  const auto ck = nn::Checkpoint::load(o.checkpoint);
  if (!ck.meta().contains("config")) throw ConfigError("checkpoint carries no run config");
  auto base = ck.meta().at("config");
  // The checkpoint's own output location is not where this command writes.
  base.erase("out_dir");
  auto cfg = resolve(o, &base);
  snapshot(cfg);
  const bool f64 = ck.meta().value("precision", std::string("f32")) == "f64";
  if (intervene) return f64 ? intervene_run<double>(cfg, ck) : intervene_run<float>(cfg, ck);
  const auto mode = percept::parse_intervention(o.intervention);
  return f64 ? eval_run<double>(cfg, ck, mode) : eval_run<float>(cfg, ck, mode);
}

}  // namespace

int main(int argc, char** argv) {
  log::init_from_env();
  CLI::App app{"Attention-guided accident anticipation on synthetic driving episodes"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset and manifest");
  add_common(gen, o);
  auto* pre = app.add_subcommand("pretrain-saliency", "fit the convolutional saliency model to oracle maps");
  add_common(pre, o);
  auto* trn = app.add_subcommand("train", "train the agent");
  add_common(trn, o);
  add_training(trn, o);
  auto* evl = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_common(evl, o);
  add_training(evl, o);
  evl->add_option("--checkpoint", o.checkpoint, "agent checkpoint")->required();
  evl->add_option("--intervention", o.intervention, "none, remove or inverse")
      ->check(CLI::IsMember({"none", "remove", "inverse"}));
  auto* itv = app.add_subcommand("intervene", "compare learned, removed and inverted attention");
  add_common(itv, o);
  itv->add_option("--checkpoint", o.checkpoint, "agent checkpoint")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) return gen_data(o);
    if (*pre) return pretrain(o);
    if (*trn) {
      const auto cfg = resolve(o);
      return cfg.trainer.precision == "f64" ? train_run<double>(cfg) : train_run<float>(cfg);
    }
    if (*evl) return from_checkpoint(o, false);
    if (*itv) return from_checkpoint(o, true);
  } catch (const ConfigError& e) {
    log::error("config error: {}", e.what());
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    log::error("config error: {}", e.what());
    return kExitConfig;
  } catch (const IoError& e) {
    log::error("i/o error: {}", e.what());
    return kExitIo;
  } catch (const FormatError& e) {
    log::error("i/o error: {}", e.what());
    return kExitIo;
  } catch (const NumericError& e) {
    log::error("numeric failure: {}", e.what());
    return kExitNumeric;
  } catch (const ContractError& e) {
    log::error("invalid request: {}", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    log::error("{}", e.what());
    return 1;
  }
  return 0;
}

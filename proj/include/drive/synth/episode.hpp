#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "drive/io.hpp"
#include "drive/percept/types.hpp"
#include "drive/reward/reward.hpp"

namespace drive::synth {

struct SceneSpec {
  std::size_t height = 48;
  std::size_t width = 64;
  int horizon = 30;
  int min_objects = 2;
  int max_objects = 4;
  int cue_lead = 10;           // steps between cue start and onset
  double onset_fraction = 1.0 / 3.0;  // onset lies in the final fraction of the horizon
  double approach_growth = 3.0;       // hazard radius multiplier reached at onset
  double noise = 0.02;
  std::uint64_t seed = 0;
  void validate() const;
};

struct SceneObject {
  double x = 0.0;  // normalised centre
  double y = 0.0;
  double radius = 0.0;  // pixels
  double intensity = 0.0;
  bool hazard = false;
  bool operator==(const SceneObject&) const = default;
};

struct Episode {
  std::vector<percept::Frame> frames;
  reward::EpisodeAnnotation annotation;
  std::vector<percept::AttentionMap> oracle_maps;      // optional, one per frame
  std::vector<std::vector<SceneObject>> objects;       // optional, one list per frame

  int horizon() const { return static_cast<int>(frames.size()); }
  std::vector<std::vector<percept::ObjectMark>> marks() const;
  bool operator==(const Episode&) const = default;
};

// Hazard radius at which a positive episode counts as an accident.
double onset_radius(double base_radius, const SceneSpec& spec);

// Onset range [L − floor(L·f), L − 1].
std::pair<int, int> onset_range(const SceneSpec& spec);

Episode gen_episode(const SceneSpec& spec, bool positive, std::mt19937_64& rng);

inline constexpr std::uint32_t kEpisodeVersion = 1;

io::Bytes encode_episode(const Episode& episode);
Episode decode_episode(const io::Bytes& bytes);
void write_episode(const Episode& episode, const std::filesystem::path& path);
Episode read_episode(const std::filesystem::path& path);

struct ManifestEntry {
  std::string split;
  std::filesystem::path path;
};

struct Manifest {
  double fps = 6.0;
  std::vector<ManifestEntry> entries;
};

void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
// Relative episode paths are resolved against the manifest's directory.
Manifest read_manifest(const std::filesystem::path& path);

struct Dataset {
  double fps = 6.0;
  std::vector<Episode> train;
  std::vector<Episode> test;
};

// Writes `n_train` + `n_test` episodes (alternating positive/negative) and a manifest.
Manifest generate_dataset(const SceneSpec& spec, int n_train, int n_test, const std::filesystem::path& dir);
// In-memory equivalent of generate_dataset followed by load_dataset.
Dataset make_dataset(const SceneSpec& spec, int n_train, int n_test);
Dataset load_dataset(const std::filesystem::path& manifest_path);

}  // namespace drive::synth

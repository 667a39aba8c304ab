#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "drive/synth/episode.hpp"

using namespace drive;
using namespace drive::synth;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("drive_synth_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("positive episodes place onset in the final third") {
  SceneSpec spec;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    std::mt19937_64 rng(s);
    const auto ep = gen_episode(spec, true, rng);
    CHECK(ep.annotation.label == 1);
    CHECK(ep.annotation.t_a >= 20);
    CHECK(ep.annotation.t_a <= 29);
    CHECK(ep.horizon() == 30);
  }
}

TEST_CASE("positive episodes: hazard crosses the onset size at t_a and fixations track it") {
  SceneSpec spec;
  for (std::uint64_t s = 0; s < 50; ++s) {
    std::mt19937_64 rng(100 + s);
    const auto ep = gen_episode(spec, true, rng);
    const int t_a = ep.annotation.t_a;
    const auto hazard_at = [&](int t) {
      for (const auto& o : ep.objects[t])
        if (o.hazard) return o;
      FAIL("no hazard object");
      return SceneObject{};
    };
    const double base = hazard_at(t_a - spec.cue_lead).radius;
    const double onset = onset_radius(base, spec);
    CHECK(hazard_at(t_a - 1).radius < onset);
    CHECK(hazard_at(t_a).radius >= onset);
    for (int t = 0; t < ep.horizon(); ++t) {
      const auto* fx = ep.annotation.fixation_at(t);
      if (t <= t_a) {
        CHECK(fx == nullptr);
      } else {
        REQUIRE(fx != nullptr);
        CHECK(fx->x == doctest::Approx(hazard_at(t).x));
        CHECK(fx->y == doctest::Approx(hazard_at(t).y));
      }
    }
  }
}

TEST_CASE("negative episodes carry no onset, fixations or hazard") {
  SceneSpec spec;
  for (std::uint64_t s = 0; s < 100; ++s) {
    std::mt19937_64 rng(s);
    const auto ep = gen_episode(spec, false, rng);
    CHECK(ep.annotation.label == 0);
    CHECK(ep.annotation.t_a < 0);
    for (int t = 0; t < ep.horizon(); ++t) {
      CHECK(ep.annotation.fixation_at(t) == nullptr);
      for (const auto& o : ep.objects[t]) CHECK_FALSE(o.hazard);
    }
  }
}

TEST_CASE("generator metadata separates the classes perfectly") {
  SceneSpec spec;
  for (std::uint64_t s = 0; s < 200; ++s) {
    std::mt19937_64 rng(s);
    const bool positive = s % 2 == 0;
    const auto ep = gen_episode(spec, positive, rng);
    bool hazard = false;
    for (const auto& o : ep.objects[0]) hazard = hazard || o.hazard;
    CHECK(hazard == positive);
  }
}

TEST_CASE("frames and oracle maps are valid") {
  SceneSpec spec;
  std::mt19937_64 rng(3);
  const auto ep = gen_episode(spec, true, rng);
  for (int t = 0; t < ep.horizon(); ++t) {
    CHECK(ep.frames[t].pixels.shape() == nn::Shape{3, 48, 64});
    CHECK(ep.frames[t].t == t);
    for (const auto v : ep.frames[t].pixels.values()) CHECK((v >= 0.0f && v <= 1.0f));
    float peak = 0.0f;
    for (const auto v : ep.oracle_maps[t].values()) {
      CHECK((v >= 0.0f && v <= 1.0f));
      peak = std::max(peak, v);
    }
    CHECK(peak == 1.0f);
  }
}

TEST_CASE("same seed gives the identical episode") {
  SceneSpec spec;
  std::mt19937_64 a(42), b(42);
  CHECK(gen_episode(spec, true, a) == gen_episode(spec, true, b));
}

TEST_CASE("episode container round trip is bit exact") {
  SceneSpec spec;
  for (const bool positive : {true, false}) {
    std::mt19937_64 rng(positive ? 5 : 6);
    const auto ep = gen_episode(spec, positive, rng);
    const auto bytes = encode_episode(ep);
    CHECK(decode_episode(bytes) == ep);
    CHECK(encode_episode(decode_episode(bytes)) == bytes);
    const auto dir = scratch("rt");
    write_episode(ep, dir / "e.drve");
    CHECK(read_episode(dir / "e.drve") == ep);
  }
}

TEST_CASE("episode container rejects corruption") {
  SceneSpec spec;
  std::mt19937_64 rng(7);
  auto bytes = encode_episode(gen_episode(spec, true, rng));
  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  CHECK_THROWS_AS(decode_episode(truncated), FormatError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_episode(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[4] = 9;
  CHECK_THROWS_AS(decode_episode(bad_version), UnsupportedVersionError);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_episode(trailing), FormatError);
  try {
    decode_episode(truncated);
  } catch (const FormatError& e) {
    CHECK(e.offset() <= truncated.size());
  }
}

TEST_CASE("dataset generation writes a manifest that loads back") {
  SceneSpec spec;
  const auto dir = scratch("ds");
  const auto m = generate_dataset(spec, 4, 2, dir);
  CHECK(m.entries.size() == 6);
  const auto loaded = load_dataset(dir / "manifest.txt");
  const auto mem = make_dataset(spec, 4, 2);
  CHECK(loaded.fps == 6.0);
  REQUIRE(loaded.train.size() == 4);
  REQUIRE(loaded.test.size() == 2);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(loaded.train[i] == mem.train[i]);
    CHECK(loaded.train[i].annotation.label == (i % 2 == 0 ? 1 : 0));
  }
  CHECK(loaded.test[0] == mem.test[0]);
}

TEST_CASE("manifest parsing errors") {
  const auto dir = scratch("mf");
  {
    std::ofstream os(dir / "manifest.txt");
    os << "# drive-dataset fps=6\nvalidation a.drve\n";
  }
  CHECK_THROWS_AS(read_manifest(dir / "manifest.txt"), ConfigError);
  CHECK_THROWS_AS(read_manifest(dir / "missing.txt"), IoError);
}

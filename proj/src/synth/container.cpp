#include <fstream>
#include <sstream>

#include "drive/synth/episode.hpp"

namespace drive::synth {

namespace {

constexpr char kMagic[4] = {'D', 'R', 'V', 'E'};
constexpr std::uint8_t kHasMaps = 1;
constexpr std::uint8_t kHasObjects = 2;

std::uint64_t episode_seed(std::uint64_t master, int split, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(split), static_cast<std::uint32_t>(index)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

Episode make_one(const SceneSpec& spec, int split, int index) {
  std::mt19937_64 rng(episode_seed(spec.seed, split, index));
  return gen_episode(spec, index % 2 == 0, rng);
}

}  // namespace

io::Bytes encode_episode(const Episode& ep) {
  DRIVE_REQUIRE(!ep.frames.empty(), "cannot encode an empty episode");
  const auto& shape = ep.frames.front().pixels.shape();
  const auto L = static_cast<std::uint32_t>(ep.frames.size());
  io::ByteWriter w;
  w.put_bytes(kMagic, 4);
  w.put(kEpisodeVersion);
  w.put(static_cast<std::uint32_t>(shape[0]));
  w.put(static_cast<std::uint32_t>(shape[1]));
  w.put(static_cast<std::uint32_t>(shape[2]));
  w.put(L);
  for (const auto& f : ep.frames) {
    DRIVE_REQUIRE(f.pixels.shape() == shape, "all frames of an episode must share a shape");
    w.put(static_cast<std::int32_t>(f.t));
    w.put_array(f.pixels.data(), f.pixels.size());
  }
  const auto& a = ep.annotation;
  w.put(static_cast<std::int32_t>(a.label));
  w.put(static_cast<std::int32_t>(a.t_a));
  w.put(static_cast<std::int32_t>(a.horizon));
  w.put(static_cast<std::uint32_t>(a.fixations.size()));
  for (const auto& fx : a.fixations) {
    w.put(static_cast<std::uint8_t>(fx ? 1 : 0));
    if (fx) {
      w.put(fx->x);
      w.put(fx->y);
    }
  }
  std::uint8_t flags = 0;
  if (!ep.oracle_maps.empty()) flags |= kHasMaps;
  if (!ep.objects.empty()) flags |= kHasObjects;
  w.put(flags);
  if (flags & kHasMaps) {
    DRIVE_REQUIRE(ep.oracle_maps.size() == L, "one oracle map per frame is required");
    const auto& ms = ep.oracle_maps.front().shape();
    w.put(static_cast<std::uint32_t>(ms[0]));
    w.put(static_cast<std::uint32_t>(ms[1]));
    for (const auto& m : ep.oracle_maps) {
      DRIVE_REQUIRE(m.shape() == ms, "oracle maps must share a shape");
      w.put_array(m.data(), m.size());
    }
  }
  if (flags & kHasObjects) {
    DRIVE_REQUIRE(ep.objects.size() == L, "one object list per frame is required");
    for (const auto& objs : ep.objects) {
      w.put(static_cast<std::uint32_t>(objs.size()));
      for (const auto& o : objs) {
        w.put(o.x);
        w.put(o.y);
        w.put(o.radius);
        w.put(o.intensity);
        w.put(static_cast<std::uint8_t>(o.hazard ? 1 : 0));
      }
    }
  }
  return std::move(w.bytes());
}

Episode decode_episode(const io::Bytes& bytes) {
  io::ByteReader r(bytes);
  if (r.get_string(4) != std::string(kMagic, 4)) throw FormatError("bad episode magic", 0);
  const auto version = r.get<std::uint32_t>();
  if (version != kEpisodeVersion)
    throw UnsupportedVersionError("unsupported episode version " + std::to_string(version), 4);
  const std::size_t dims_at = r.position();
  const auto C = r.get<std::uint32_t>(), H = r.get<std::uint32_t>(), W = r.get<std::uint32_t>();
  const auto L = r.get<std::uint32_t>();
  if (C != 3 || H == 0 || W == 0 || L == 0) throw FormatError("invalid episode dimensions", dims_at);
  // Reject absurd sizes before allocating.
  r.need(static_cast<std::size_t>(L) * (4 + sizeof(float) * C * H * W));

  Episode ep;
  ep.frames.reserve(L);
  for (std::uint32_t t = 0; t < L; ++t) {
    percept::Frame f;
    f.t = r.get<std::int32_t>();
    f.pixels = nn::NdArray<float>(nn::Shape{C, H, W});
    r.get_array(f.pixels.data(), f.pixels.size());
    ep.frames.push_back(std::move(f));
  }
  auto& a = ep.annotation;
  const std::size_t ann_at = r.position();
  a.label = r.get<std::int32_t>();
  a.t_a = r.get<std::int32_t>();
  a.horizon = r.get<std::int32_t>();
  const auto nfix = r.get<std::uint32_t>();
  if (nfix != 0 && nfix != L) throw FormatError("fixation list length does not match horizon", ann_at);
  a.fixations.resize(nfix);
  for (auto& fx : a.fixations) {
    const auto present = r.get<std::uint8_t>();
    if (present > 1) throw FormatError("invalid fixation presence flag", r.position() - 1);
    if (present) {
      percept::FixationPoint p;
      p.x = r.get<double>();
      p.y = r.get<double>();
      fx = p;
    }
  }
  try {
    a.validate();
  } catch (const ContractError& ex) {
    throw FormatError(std::string("invalid annotation: ") + ex.what(), ann_at);
  }
  const auto flags = r.get<std::uint8_t>();
  if (flags & ~(kHasMaps | kHasObjects)) throw FormatError("unknown episode flags", r.position() - 1);
  if (flags & kHasMaps) {
    const auto gh = r.get<std::uint32_t>(), gw = r.get<std::uint32_t>();
    r.need(static_cast<std::size_t>(L) * gh * gw * sizeof(float));
    for (std::uint32_t t = 0; t < L; ++t) {
      percept::AttentionMap m(nn::Shape{gh, gw});
      r.get_array(m.data(), m.size());
      ep.oracle_maps.push_back(std::move(m));
    }
  }
  if (flags & kHasObjects) {
    ep.objects.resize(L);
    for (auto& objs : ep.objects) {
      const auto n = r.get<std::uint32_t>();
      r.need(static_cast<std::size_t>(n) * 33);
      objs.resize(n);
      for (auto& o : objs) {
        o.x = r.get<double>();
        o.y = r.get<double>();
        o.radius = r.get<double>();
        o.intensity = r.get<double>();
        o.hazard = r.get<std::uint8_t>() != 0;
      }
    }
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after episode", r.position());
  return ep;
}

void write_episode(const Episode& episode, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_episode(episode));
}

Episode read_episode(const std::filesystem::path& path) { return decode_episode(io::read_file(path)); }

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  std::ostringstream os;
  os.precision(17);
  os << "# drive-dataset fps=" << manifest.fps << "\n";
  for (const auto& e : manifest.entries) os << e.split << " " << e.path.generic_string() << "\n";
  io::write_text_atomic(path, os.str());
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::istringstream is(io::read_text(path));
  Manifest m;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto at = line.find("fps=");
      if (at != std::string::npos) m.fps = std::stod(line.substr(at + 4));
      continue;
    }
    const auto sp = line.find(' ');
    if (sp == std::string::npos) throw ConfigError("manifest line " + std::to_string(lineno) + ": expected '<split> <path>'");
    ManifestEntry e{line.substr(0, sp), line.substr(sp + 1)};
    if (e.split != "train" && e.split != "test")
      throw ConfigError("manifest line " + std::to_string(lineno) + ": unknown split '" + e.split + "'");
    if (e.path.is_relative()) e.path = path.parent_path() / e.path;
    m.entries.push_back(std::move(e));
  }
  return m;
}

Manifest generate_dataset(const SceneSpec& spec, int n_train, int n_test, const std::filesystem::path& dir) {
  spec.validate();
  std::filesystem::create_directories(dir / "episodes");
  Manifest m;
  for (int split = 0; split < 2; ++split) {
    const int n = split == 0 ? n_train : n_test;
    const std::string name = split == 0 ? "train" : "test";
    for (int i = 0; i < n; ++i) {
      char file[64];
      std::snprintf(file, sizeof(file), "episodes/%s_%05d.drve", name.c_str(), i);
      write_episode(make_one(spec, split, i), dir / file);
      m.entries.push_back({name, file});
    }
  }
  write_manifest(m, dir / "manifest.txt");
  return m;
}

Dataset make_dataset(const SceneSpec& spec, int n_train, int n_test) {
  spec.validate();
  Dataset d;
  for (int i = 0; i < n_train; ++i) d.train.push_back(make_one(spec, 0, i));
  for (int i = 0; i < n_test; ++i) d.test.push_back(make_one(spec, 1, i));
  return d;
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  const auto m = read_manifest(manifest_path);
  Dataset d;
  d.fps = m.fps;
  for (const auto& e : m.entries) (e.split == "train" ? d.train : d.test).push_back(read_episode(e.path));
  return d;
}

}  // namespace drive::synth

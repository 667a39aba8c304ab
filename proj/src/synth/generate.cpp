#include "drive/synth/episode.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "drive/percept/saliency.hpp"

namespace drive::synth {

namespace {

constexpr double kEgoX = 0.5;
constexpr double kEgoY = 0.9;
constexpr double kRoadTop = 0.35;
constexpr double kRoadBottom = 0.85;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

struct Mover {
  double x, y, vx, vy, base_radius, intensity;
  double r, g, b;
};

// Distant vehicles appear smaller.
double perspective_radius(double base, double y) {
  return base * (0.7 + 0.6 * std::clamp((y - kRoadTop) / (kRoadBottom - kRoadTop), 0.0, 1.0));
}

struct Background {
  nn::NdArray<float> pixels;
};

Background make_background(const SceneSpec& spec, std::mt19937_64& rng) {
  const std::size_t H = spec.height, W = spec.width;
  Background bg{nn::NdArray<float>(nn::Shape{3, H, W})};
  double fx[3], fy[3], ph[3], amp[3];
  for (int k = 0; k < 3; ++k) {
    fx[k] = uniform(rng, 1.0, 6.0);
    fy[k] = uniform(rng, 1.0, 6.0);
    ph[k] = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    amp[k] = uniform(rng, 0.01, 0.04);
  }
  const double sky[3] = {uniform(rng, 0.5, 0.6), uniform(rng, 0.65, 0.75), uniform(rng, 0.85, 0.95)};
  const double road = uniform(rng, 0.3, 0.45);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      const double u = (x + 0.5) / W, v = (y + 0.5) / H;
      double tex = 0.0;
      for (int k = 0; k < 3; ++k) tex += amp[k] * std::sin(2 * std::numbers::pi * (fx[k] * u + fy[k] * v) + ph[k]);
      const bool lane = std::abs(u - 0.5) < 0.012 && v > kRoadTop && std::fmod(v * 10.0, 1.0) < 0.5;
      for (std::size_t c = 0; c < 3; ++c) {
        double base;
        if (v < kRoadTop - 0.05)
          base = sky[c] - 0.15 * v;
        else if (v < kRoadTop)
          base = 0.5 * (sky[c] + road);
        else
          base = road + 0.08 * (v - kRoadTop);
        if (lane) base = 0.85;
        bg.pixels.at(c, y, x) = static_cast<float>(base + tex);
      }
    }
  return bg;
}

void render(nn::NdArray<float>& px, const SceneObject& o, const double rgb[3], const SceneSpec& spec) {
  const std::size_t H = spec.height, W = spec.width;
  const double cx = o.x * W, cy = o.y * H;
  const int reach = static_cast<int>(std::ceil(3.0 * o.radius));
  const int x0 = std::max(0, static_cast<int>(cx) - reach), x1 = std::min<int>(W - 1, static_cast<int>(cx) + reach);
  const int y0 = std::max(0, static_cast<int>(cy) - reach), y1 = std::min<int>(H - 1, static_cast<int>(cy) + reach);
  const double inv = 1.0 / (2.0 * o.radius * o.radius);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      const double a = o.intensity * std::exp(-(dx * dx + dy * dy) * inv);
      for (std::size_t c = 0; c < 3; ++c) {
        float& p = px.at(c, y, x);
        p = static_cast<float>((1.0 - a) * p + a * rgb[c]);
      }
    }
}

}  // namespace

void SceneSpec::validate() const {
  if (height == 0 || width == 0 || height % 8 || width % 8) throw ConfigError("frame size must be a positive multiple of 8");
  if (horizon < 3) throw ConfigError("horizon must be at least 3");
  if (min_objects < 1 || max_objects < min_objects) throw ConfigError("invalid object count range");
  if (!(onset_fraction > 0.0 && onset_fraction < 1.0)) throw ConfigError("onset_fraction must lie in (0, 1)");
  const auto [lo, hi] = onset_range(*this);
  if (lo < 1 || lo > hi) throw ConfigError("onset range is empty for this horizon");
  if (cue_lead < 1 || cue_lead > lo) throw ConfigError("cue_lead must lie in [1, earliest onset]");
  if (!(approach_growth > 1.0)) throw ConfigError("approach_growth must exceed 1");
  if (!(noise >= 0.0)) throw ConfigError("noise must be non-negative");
}

std::pair<int, int> onset_range(const SceneSpec& spec) {
  const int span = static_cast<int>(std::floor(spec.horizon * spec.onset_fraction));
  return {spec.horizon - span, spec.horizon - 1};
}

double onset_radius(double base_radius, const SceneSpec& spec) { return base_radius * spec.approach_growth; }

std::vector<std::vector<percept::ObjectMark>> Episode::marks() const {
  std::vector<std::vector<percept::ObjectMark>> out(objects.size());
  for (std::size_t t = 0; t < objects.size(); ++t)
    for (const auto& o : objects[t]) out[t].push_back({o.x, o.y});
  return out;
}

Episode gen_episode(const SceneSpec& spec, bool positive, std::mt19937_64& rng) {
  spec.validate();
  const int L = spec.horizon;
  const auto bg = make_background(spec, rng);
  const int count = std::uniform_int_distribution<int>(spec.min_objects, spec.max_objects)(rng);

  std::vector<Mover> movers(count);
  for (auto& m : movers) {
    m.x = uniform(rng, 0.1, 0.9);
    m.y = uniform(rng, kRoadTop + 0.05, kRoadBottom - 0.05);
    m.vx = uniform(rng, -0.012, 0.012);
    m.vy = uniform(rng, -0.006, 0.006);
    m.base_radius = uniform(rng, 2.5, 3.5);
    m.intensity = uniform(rng, 0.7, 0.9);
    m.r = uniform(rng, 0.05, 0.95);
    m.g = uniform(rng, 0.05, 0.95);
    m.b = uniform(rng, 0.05, 0.95);
  }

  Episode ep;
  ep.annotation.label = positive ? 1 : 0;
  ep.annotation.horizon = L;
  int cue_start = L + 1;
  if (positive) {
    const auto [lo, hi] = onset_range(spec);
    ep.annotation.t_a = std::uniform_int_distribution<int>(lo, hi)(rng);
    ep.annotation.fixations.assign(L, std::nullopt);
    cue_start = ep.annotation.t_a - spec.cue_lead;
  }

  std::normal_distribution<double> noise(0.0, spec.noise);
  const auto grid = percept::GridSpec{spec.height, spec.width, 8, 64};
  const percept::OracleSaliency oracle(grid);
  double hazard_x0 = 0.0, hazard_y0 = 0.0;

  for (int t = 0; t < L; ++t) {
    std::vector<SceneObject> objs;
    for (int k = 0; k < count; ++k) {
      auto& m = movers[k];
      SceneObject o{m.x, m.y, perspective_radius(m.base_radius, m.y), m.intensity, false};
      if (positive && k == 0) {
        o.hazard = true;
        if (t == cue_start) {
          hazard_x0 = m.x;
          hazard_y0 = m.y;
        }
        if (t >= cue_start) {
          // Converge on the ego position; the radius reaches the onset
          // threshold exactly at t_a and keeps growing afterwards.
          const double s = static_cast<double>(t - cue_start) / spec.cue_lead;
          const double along = std::min(s, 1.0);
          const double base = perspective_radius(m.base_radius, hazard_y0);
          o.x = hazard_x0 + (kEgoX - hazard_x0) * along;
          o.y = hazard_y0 + (kEgoY - hazard_y0) * along;
          o.radius = base * (1.0 + (spec.approach_growth - 1.0) * s);
          o.intensity = m.intensity + (1.0 - m.intensity) * along;
        }
      }
      objs.push_back(o);
    }

    percept::Frame frame{bg.pixels, t};
    for (int k = 0; k < count; ++k) {
      const double rgb[3] = {movers[k].r, movers[k].g, movers[k].b};
      render(frame.pixels, objs[k], rgb, spec);
    }
    for (auto& p : frame.pixels.values()) p = std::clamp(static_cast<float>(p + noise(rng)), 0.0f, 1.0f);

    if (positive && t > ep.annotation.t_a) ep.annotation.fixations[t] = percept::FixationPoint{objs[0].x, objs[0].y};

    std::vector<percept::ObjectMark> marks;
    for (const auto& o : objs) marks.push_back({o.x, o.y});
    ep.oracle_maps.push_back(oracle.map_for(marks));
    ep.objects.push_back(std::move(objs));
    ep.frames.push_back(std::move(frame));

    for (auto& m : movers) {
      m.x += m.vx;
      m.y += m.vy;
      if (m.x < 0.05 || m.x > 0.95) m.vx = -m.vx, m.x = std::clamp(m.x, 0.05, 0.95);
      if (m.y < kRoadTop || m.y > kRoadBottom) m.vy = -m.vy, m.y = std::clamp(m.y, kRoadTop, kRoadBottom);
    }
  }
  ep.annotation.validate();
  return ep;
}

}  // namespace drive::synth

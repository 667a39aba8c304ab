#include "drive/percept/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "drive/nn/adam.hpp"

namespace drive::percept {

void SaliencyModel::check_frame(const Frame& frame) const {
  DRIVE_REQUIRE(frame.pixels.rank() == 3 && frame.pixels.dim(0) == 3, "frame must be [3×H×W]");
  DRIVE_REQUIRE(frame.height() == grid().height && frame.width() == grid().width,
                "frame resolution " + nn::shape_str(frame.pixels.shape()) + " does not match model " +
                    std::to_string(grid().height) + "x" + std::to_string(grid().width));
}

AttentionMap SaliencyModel::predict_foveated(const Frame& frame, const Pyramid& pyramid,
                                             std::span<const ObjectMark> marks, const FixationPoint& fixation,
                                             const FoveationParams& params) const {
  return predict(foveate(frame, pyramid, fixation, params), marks).map;
}

// ---------------------------------------------------------------- oracle

OracleSaliency::OracleSaliency(GridSpec grid, std::uint64_t feature_seed) : grid_(grid) {
  DRIVE_REQUIRE(grid_.height % grid_.stride == 0 && grid_.width % grid_.stride == 0,
                "frame size must be a multiple of the feature stride");
  DRIVE_REQUIRE(grid_.channels >= 2 * kContrastDims, "oracle features need at least 18 channels");
  sigma_px_ = 0.06 * std::hypot(static_cast<double>(grid_.height), static_cast<double>(grid_.width));
  const auto mixed = static_cast<Eigen::Index>(grid_.channels - 2 * kContrastDims);
  projection_.resize(mixed, static_cast<Eigen::Index>(kDescriptorDims));
  offsets_.resize(mixed);
  std::mt19937_64 rng(feature_seed);
  std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(static_cast<double>(kDescriptorDims)));
  for (Eigen::Index i = 0; i < projection_.size(); ++i) projection_.data()[i] = static_cast<float>(nd(rng));
  std::uniform_real_distribution<double> ud(-0.3, 0.0);
  for (Eigen::Index i = 0; i < mixed; ++i) offsets_[i] = static_cast<float>(ud(rng));
}

AttentionMap OracleSaliency::mixture(std::span<const ObjectMark> marks, std::span<const double> weights) const {
  const std::size_t gh = grid_.grid_h(), gw = grid_.grid_w();
  const double cell_h = static_cast<double>(grid_.height) / gh, cell_w = static_cast<double>(grid_.width) / gw;
  const double inv2s2 = 1.0 / (2.0 * sigma_px_ * sigma_px_);
  AttentionMap out(nn::Shape{gh, gw});
  for (std::size_t i = 0; i < gh; ++i)
    for (std::size_t j = 0; j < gw; ++j) {
      const double cy = (i + 0.5) * cell_h, cx = (j + 0.5) * cell_w;
      double s = 0.0;
      for (std::size_t k = 0; k < marks.size(); ++k) {
        const double dx = cx - marks[k].x * grid_.width, dy = cy - marks[k].y * grid_.height;
        s += weights[k] * std::exp(-(dx * dx + dy * dy) * inv2s2);
      }
      out.at(i, j) = static_cast<float>(s);
    }
  return out;
}

AttentionMap OracleSaliency::map_for(std::span<const ObjectMark> marks) const {
  const std::vector<double> ones(marks.size(), 1.0);
  auto m = mixture(marks, ones);
  const float peak = m.empty() ? 0.0f : *std::max_element(m.values().begin(), m.values().end());
  if (peak > 0.0f)
    for (auto& v : m.values()) v = std::min(1.0f, v / peak);
  return m;
}

FeatureVolume OracleSaliency::features_for(const Frame& frame) const {
  const std::size_t gh = grid_.grid_h(), gw = grid_.grid_w(), st = grid_.stride;
  const std::size_t cells = gh * gw;
  // Cell descriptors: centre-surround colour contrast at three scales and a
  // radial-basis code of the cell position.
  nn::RowMatrix<float> desc(static_cast<Eigen::Index>(kDescriptorDims), static_cast<Eigen::Index>(cells));
  std::vector<nn::NdArray<float>> blurred;
  for (int k = 0; k <= kContrastScales; ++k) blurred.push_back(gaussian_blur(frame.pixels, std::ldexp(1.0, k)));
  for (int k = 0; k < kContrastScales; ++k)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < gh; ++i)
        for (std::size_t j = 0; j < gw; ++j) {
          double s = 0.0;
          for (std::size_t dy = 0; dy < st; ++dy)
            for (std::size_t dx = 0; dx < st; ++dx) {
              const std::size_t y = i * st + dy, x = j * st + dx;
              s += blurred[k].at(c, y, x) - blurred[k + 1].at(c, y, x);
            }
          desc(static_cast<Eigen::Index>(k * 3 + c), static_cast<Eigen::Index>(i * gw + j)) =
              static_cast<float>(kContrastGain * s / static_cast<double>(st * st));
        }
  for (int a = 0; a < kPositionRows; ++a)
    for (int b = 0; b < kPositionCols; ++b) {
      const double uy = (a + 0.5) / kPositionRows, ux = (b + 0.5) / kPositionCols;
      for (std::size_t i = 0; i < gh; ++i)
        for (std::size_t j = 0; j < gw; ++j) {
          const double dy = (i + 0.5) / gh - uy, dx = (j + 0.5) / gw - ux;
          desc(static_cast<Eigen::Index>(kContrastDims + a * kPositionCols + b),
               static_cast<Eigen::Index>(i * gw + j)) =
              static_cast<float>(std::exp(-(dx * dx + dy * dy) / (2.0 * kPositionWidth * kPositionWidth)));
        }
    }

  FeatureVolume v(nn::Shape{grid_.channels, gh, gw});
  auto out = v.matrix().reshaped<Eigen::RowMajor>(static_cast<Eigen::Index>(grid_.channels),
                                                  static_cast<Eigen::Index>(cells));
  const auto contrast = desc.topRows(kContrastDims);
  out.topRows(kContrastDims) = contrast.cwiseMax(0.0f);
  out.middleRows(kContrastDims, kContrastDims) = (-contrast).cwiseMax(0.0f);
  out.bottomRows(projection_.rows()) =
      ((projection_ * desc).colwise() + offsets_).cwiseMax(0.0f);
  return v;
}

SaliencyOutput OracleSaliency::predict(const Frame& frame, std::span<const ObjectMark> marks) const {
  check_frame(frame);
  return {map_for(marks), features_for(frame)};
}

AttentionMap OracleSaliency::predict_foveated(const Frame& frame, const Pyramid&, std::span<const ObjectMark> marks,
                                              const FixationPoint& fixation, const FoveationParams& params) const {
  check_frame(frame);
  require_valid(fixation);
  const std::vector<double> ones(marks.size(), 1.0);
  const auto base = mixture(marks, ones);
  const float peak = base.empty() ? 0.0f : *std::max_element(base.values().begin(), base.values().end());
  std::vector<double> w(marks.size());
  for (std::size_t k = 0; k < marks.size(); ++k) {
    const double e = eccentricity(marks[k].x * grid_.width, marks[k].y * grid_.height, fixation, grid_.height,
                                  grid_.width);
    w[k] = std::exp2(-blend_level(e, params));
  }
  auto m = mixture(marks, w);
  if (peak > 0.0f)
    for (auto& v : m.values()) v = std::clamp(v / peak, 0.0f, 1.0f);
  return m;
}

// ---------------------------------------------------------------- conv

ConvSaliency::ConvSaliency(GridSpec grid, nn::Rng& rng)
    : grid_(grid),
      c1_(3, 16, 3, 2, 1, rng),
      c2_(16, 32, 3, 2, 1, rng),
      c3_(32, grid.channels, 3, 2, 1, rng),
      head_(grid.channels, 1, 1, 1, 0, rng) {
  DRIVE_REQUIRE(grid_.stride == 8, "conv saliency downsamples by exactly 8");
}

ConvSaliency::Graph ConvSaliency::forward(const Frame& frame) const {
  check_frame(frame);
  const auto x = nn::constant(frame.pixels);
  const auto f1 = nn::relu(c1_(x));
  const auto f2 = nn::relu(c2_(f1));
  const auto v = nn::relu(c3_(f2));
  const auto m = nn::minmax_normalize(head_(v));
  return {nn::reshape(m, nn::Shape{grid_.grid_h(), grid_.grid_w()}), v};
}

SaliencyOutput ConvSaliency::predict(const Frame& frame, std::span<const ObjectMark>) const {
  nn::NoGradGuard guard;
  const auto g = forward(frame);
  return {g.map.value(), g.features.value()};
}

nn::ParamList<float> ConvSaliency::params() const {
  nn::ParamList<float> out;
  c1_.collect(out, "c1");
  c2_.collect(out, "c2");
  c3_.collect(out, "c3");
  head_.collect(out, "head");
  return out;
}

void ConvSaliency::save(nn::Checkpoint& ck) const {
  ck.put_params("saliency", params());
  ck.meta()["saliency"] = {{"variant", "conv"},
                           {"height", grid_.height},
                           {"width", grid_.width},
                           {"channels", grid_.channels}};
}

std::unique_ptr<ConvSaliency> ConvSaliency::load(const nn::Checkpoint& ck) {
  const auto& m = ck.meta().at("saliency");
  GridSpec g;
  g.height = m.at("height").get<std::size_t>();
  g.width = m.at("width").get<std::size_t>();
  g.channels = m.at("channels").get<std::size_t>();
  nn::Rng rng(0);
  auto model = std::make_unique<ConvSaliency>(g, rng);
  ck.load_params("saliency", model->params());
  return model;
}

std::vector<double> pretrain_saliency(ConvSaliency& model, const std::vector<PretrainSample>& samples,
                                      const PretrainConfig& cfg) {
  if (samples.empty()) throw ConfigError("saliency pretraining needs at least one frame");
  model.set_frozen(false);
  auto params = model.params();
  nn::set_requires_grad(params, true);
  nn::Adam<float> opt(params, {.lr = cfg.lr});
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> history;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (const auto idx : order) {
      const auto& s = samples[idx];
      opt.zero_grad();
      const auto g = model.forward(*s.frame);
      const auto loss = nn::mean(nn::square(nn::sub(g.map, nn::constant(*s.target))));
      nn::backward(loss);
      opt.step();
      total += loss.item();
    }
    history.push_back(total / static_cast<double>(samples.size()));
  }
  nn::set_requires_grad(params, false);
  model.set_frozen(true);
  return history;
}

std::unique_ptr<SaliencyModel> load_saliency(const std::filesystem::path& path) {
  return ConvSaliency::load(nn::Checkpoint::load(path));
}

}  // namespace drive::percept

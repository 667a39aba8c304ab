#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "drive/nn/checkpoint.hpp"
#include "drive/nn/layers.hpp"
#include "drive/percept/foveate.hpp"

namespace drive::percept {

struct SaliencyOutput {
  AttentionMap map;        // [H'×W']
  FeatureVolume features;  // [C×H'×W']
};

struct GridSpec {
  std::size_t height = 48;
  std::size_t width = 64;
  std::size_t stride = 8;
  std::size_t channels = 64;

  std::size_t grid_h() const { return height / stride; }
  std::size_t grid_w() const { return width / stride; }
};

class SaliencyModel {
 public:
  virtual ~SaliencyModel() = default;

  virtual std::string variant() const = 0;
  virtual const GridSpec& grid() const = 0;
  virtual SaliencyOutput predict(const Frame& frame, std::span<const ObjectMark> marks) const = 0;
  // Saliency of the frame foveated at `fixation`. The default foveates the
  // pixels and reruns `predict`.
  virtual AttentionMap predict_foveated(const Frame& frame, const Pyramid& pyramid,
                                        std::span<const ObjectMark> marks, const FixationPoint& fixation,
                                        const FoveationParams& params) const;

  bool frozen() const { return frozen_; }
  void set_frozen(bool on) { frozen_ = on; }

 protected:
  void check_frame(const Frame& frame) const;

 private:
  bool frozen_ = true;
};

// Analytic saliency for synthetic scenes: a mixture of isotropic Gaussians at
// object centres (σ = 6% of the frame diagonal) sampled at feature-cell
// centres and peak-normalised. Features per cell are multi-scale colour
// contrast plus a coarse position code, expanded by a fixed random ReLU layer.
class OracleSaliency final : public SaliencyModel {
 public:
  explicit OracleSaliency(GridSpec grid = {}, std::uint64_t feature_seed = 0x5a11e1c7ULL);

  std::string variant() const override { return "oracle"; }
  const GridSpec& grid() const override { return grid_; }
  SaliencyOutput predict(const Frame& frame, std::span<const ObjectMark> marks) const override;
  // Each component is attenuated by 2^(−level) where level is the pyramid
  // coordinate at the object's eccentricity, normalised by the bottom-up peak.
  AttentionMap predict_foveated(const Frame& frame, const Pyramid& pyramid, std::span<const ObjectMark> marks,
                                const FixationPoint& fixation, const FoveationParams& params) const override;

  AttentionMap map_for(std::span<const ObjectMark> marks) const;
  FeatureVolume features_for(const Frame& frame) const;
  double sigma_px() const { return sigma_px_; }

 private:
  // Unnormalised mixture with per-object weights.
  AttentionMap mixture(std::span<const ObjectMark> marks, std::span<const double> weights) const;

  GridSpec grid_;
  double sigma_px_;
  static constexpr int kContrastScales = 3;
  static constexpr int kContrastDims = 3 * kContrastScales;
  static constexpr int kPositionRows = 3;
  static constexpr int kPositionCols = 4;
  static constexpr int kDescriptorDims = kContrastDims + kPositionRows * kPositionCols;
  static constexpr double kContrastGain = 6.0;
  static constexpr double kPositionWidth = 0.2;

  nn::RowMatrix<float> projection_;  // [(C − 18) × descriptor]
  Eigen::VectorXf offsets_;
};

// Three stride-2 3×3 convolutions with ReLU produce the 64-channel feature
// volume; a 1×1 convolution and min-max normalisation produce the map.
class ConvSaliency final : public SaliencyModel {
 public:
  ConvSaliency(GridSpec grid, nn::Rng& rng);

  std::string variant() const override { return "conv"; }
  const GridSpec& grid() const override { return grid_; }
  SaliencyOutput predict(const Frame& frame, std::span<const ObjectMark> marks) const override;

  struct Graph {
    nn::Var<float> map;       // [H'×W']
    nn::Var<float> features;  // [C×H'×W']
  };
  Graph forward(const Frame& frame) const;

  nn::ParamList<float> params() const;
  void save(nn::Checkpoint& ck) const;
  static std::unique_ptr<ConvSaliency> load(const nn::Checkpoint& ck);

 private:
  GridSpec grid_;
  nn::Conv2d<float> c1_, c2_, c3_, head_;
};

struct PretrainConfig {
  int epochs = 8;
  double lr = 1e-3;
  std::uint64_t seed = 1;
};

struct PretrainSample {
  const Frame* frame;
  const AttentionMap* target;
};

// Pixelwise MSE against oracle maps, Adam, one frame per step. Returns the
// mean training loss of each epoch. Leaves the model frozen.
std::vector<double> pretrain_saliency(ConvSaliency& model, const std::vector<PretrainSample>& samples,
                                      const PretrainConfig& cfg);

std::unique_ptr<SaliencyModel> load_saliency(const std::filesystem::path& path);

}  // namespace drive::percept

#pragma once

#include "clip/rng.hpp"
#include "clip/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>

namespace clip {

// Density regressor: conv 5x5 (1 -> 8 channels) + ReLU, conv 3x3 (8 -> 8)
// + ReLU, 1x1 head (8 -> 1) + ReLU. Same-padding everywhere, so the output
// grid matches the input resolution. Parameters live in one flat vector so
// the optimizer and serialization can treat the model as a single array.
struct ModelParams {
  static constexpr int kConv1Out = 8;
  static constexpr int kConv1Kernel = 5;
  static constexpr int kConv2Out = 8;
  static constexpr int kConv2Kernel = 3;

  static constexpr int kConv1WeightOffset = 0;
  static constexpr int kConv1BiasOffset =
      kConv1WeightOffset + kConv1Out * kConv1Kernel * kConv1Kernel;
  static constexpr int kConv2WeightOffset = kConv1BiasOffset + kConv1Out;
  static constexpr int kConv2BiasOffset =
      kConv2WeightOffset + kConv2Out * kConv1Out * kConv2Kernel * kConv2Kernel;
  static constexpr int kHeadWeightOffset = kConv2BiasOffset + kConv2Out;
  static constexpr int kHeadBiasOffset = kHeadWeightOffset + kConv2Out;
  static constexpr int kParamCount = kHeadBiasOffset + 1;

  Eigen::VectorXd values = Eigen::VectorXd::Zero(kParamCount);
};

// Adam with bias correction. step_count counts completed updates.
struct OptimizerState {
  double learning_rate{1e-4};
  double beta1{0.9};
  double beta2{0.999};
  double epsilon{1e-8};
  long step_count{0};
  Eigen::VectorXd first_moment =
      Eigen::VectorXd::Zero(ModelParams::kParamCount);
  Eigen::VectorXd second_moment =
      Eigen::VectorXd::Zero(ModelParams::kParamCount);
};

struct AugmentConfig {
  double hflip_prob{0.5};
  double brightness_delta{0.1};
  double contrast_min{0.9};
  double contrast_max{1.1};
};

// Glorot-uniform weights per layer; biases start at zero so no ReLU layer
// can be dead everywhere before the first update.
ModelParams init_model(std::uint64_t seed);

// Predicted density for one image. Requires the image to be at least 7x7
// (the receptive field of the stacked convolutions).
DensityGrid forward(const ModelParams& params, const ImageGrid& image);

// Squared L2 distance summed over cells.
double loss(const DensityGrid& predicted, const DensityGrid& truth);

// Mean per-sample loss over the batch. Every sample needs a cached density.
double batch_loss(const ModelParams& params, std::span<const Sample> batch);

// Same loss plus its exact gradient with respect to every parameter.
std::pair<double, Eigen::VectorXd> batch_loss_gradient(
    const ModelParams& params, std::span<const Sample> batch);

// One Adam update; returns the pre-step batch loss.
double train_batch(ModelParams& params, OptimizerState& optimizer,
                   std::span<const Sample> batch);

// Draws flip, brightness and contrast in that fixed order (always all
// three, so the stream position does not depend on outcomes). A horizontal
// flip mirrors image, dots and cached density; brightness and contrast map
// v to clamp(v * contrast + shift, 0, 1) on the image only.
Sample augment(const Sample& sample, const AugmentConfig& config, Rng& rng);

// Checkpoint layout: magic "CLPM", uint32 version, uint32 parameter count,
// uint32 reserved (16-byte header), then float64 little-endian parameters.
void save_checkpoint(const ModelParams& params,
                     const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace clip

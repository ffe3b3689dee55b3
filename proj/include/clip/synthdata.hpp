#pragma once

#include "clip/rng.hpp"
#include "clip/types.hpp"

#include <cstdint>

namespace clip {

struct SceneConfig {
  Eigen::Index height{32};
  Eigen::Index width{32};
  int count_min{0};
  int count_max{30};
  // Bandwidth of the intensity blob drawn per head.
  double blob_sigma{1.5};
  double noise_std{0.02};
  // Bandwidth of the cached ground-truth density.
  double sigma_gt{2.0};
};

// Throws std::invalid_argument on out-of-range fields (sides >= 16,
// 0 <= count_min <= count_max, positive bandwidths, noise_std >= 0).
void validate(const SceneConfig& config);

// One scene: a uniform head count in [count_min, count_max], dot positions
// kept >= 2px apart by rejection (up to 100 retries per dot, then the draw
// is accepted as-is), an intensity image made of Gaussian blobs plus pixel
// noise, and the rendered ground-truth density. Image values are clamped to
// [0, 1] and quantized to the 8-bit grid so saving and reloading is exact.
// The id is left empty.
Sample generate_scene(const SceneConfig& config, Rng& rng);

// n scenes with ids "syn-000000", "syn-000001", ... Each scene draws from
// its own stream of `seed`, so a dataset is reproducible from (n, config,
// seed) alone.
Dataset generate_dataset(int n, const SceneConfig& config,
                         std::uint64_t seed);

}  // namespace clip

#pragma once

#include "clip/types.hpp"

#include <span>
#include <vector>

namespace clip {

struct MetricsRecord {
  double mae{0.0};
  double game{0.0};
  double ssim{0.0};
  double psnr{0.0};
};

// Mean absolute error between paired count estimates.
double mae(std::span<const double> estimated, std::span<const double> truth);

// Grid Average Mean absolute Error: split both grids into 2^level x 2^level
// near-equal patches (the remainder rows/columns go to the last patch) and
// sum the absolute per-patch count differences. Level 0 reduces to the
// absolute count difference.
double game(const DensityGrid& predicted, const DensityGrid& truth, int level);

// Mean structural similarity over all 11x11 sliding windows (Gaussian
// weights, sigma 1.5). The dynamic range is the largest value seen in either
// grid, floored at 1e-12. Requires both sides of each grid to be >= 11.
double ssim(const DensityGrid& a, const DensityGrid& b);

// 10*log10(max^2 / MSE) with max taken from the truth grid (floored at
// 1e-12). Identical grids give +infinity.
double psnr(const DensityGrid& predicted, const DensityGrid& truth);

// Per-dataset aggregation: MAE over predicted vs ground-truth counts (sums
// of the respective density grids), mean GAME
// and SSIM over samples, mean PSNR over samples with finite PSNR (all
// infinite collapses to +infinity). Every sample needs a cached density.
MetricsRecord evaluate(const std::vector<DensityGrid>& predictions,
                       const Dataset& dataset, int game_level);

}  // namespace clip

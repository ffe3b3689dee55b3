#pragma once

#include "clip/types.hpp"

#include <cmath>

namespace clip {

struct KernelSpec {
  double sigma{2.0};
  int truncation_radius{6};

  KernelSpec() = default;
  explicit KernelSpec(double sigma_in)
      : sigma(sigma_in),
        truncation_radius(static_cast<int>(std::ceil(3.0 * sigma_in))) {}
  KernelSpec(double sigma_in, int radius)
      : sigma(sigma_in), truncation_radius(radius) {}
};

// Throws std::invalid_argument when sigma <= 0 or truncation_radius < 1.
void validate(const KernelSpec& spec);

// (2r+1) x (2r+1) isotropic Gaussian with unit sum.
DensityGrid gaussian_kernel(const KernelSpec& spec);

// Stamps one renormalized kernel per dot. Each dot snaps to the nearest
// pixel center; the portion of its kernel that lands inside the grid is
// rescaled to unit mass, so the result sums to the number of dots even for
// dots near the border. Out-of-bounds dots throw ValidationError.
DensityGrid render_density(const DotAnnotations& dots, Eigen::Index height,
                           Eigen::Index width, const KernelSpec& spec);

}  // namespace clip

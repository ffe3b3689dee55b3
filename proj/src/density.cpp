#include "clip/density.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace clip {

void validate(const KernelSpec& spec) {
  if (!(spec.sigma > 0.0)) {
    throw std::invalid_argument("kernel sigma must be positive, got " +
                                std::to_string(spec.sigma));
  }
  if (spec.truncation_radius < 1) {
    throw std::invalid_argument("kernel truncation radius must be >= 1, got " +
                                std::to_string(spec.truncation_radius));
  }
}

DensityGrid gaussian_kernel(const KernelSpec& spec) {
  validate(spec);
  const int r = spec.truncation_radius;
  const int side = 2 * r + 1;
  const double inv = 1.0 / (2.0 * spec.sigma * spec.sigma);
  Eigen::ArrayXd line(side);
  for (int i = 0; i < side; ++i) {
    const double d = static_cast<double>(i - r);
    line(i) = std::exp(-d * d * inv);
  }
  Grid kernel = (line.matrix() * line.matrix().transpose()).array();
  kernel /= kernel.sum();
  return kernel;
}

bool dots_in_bounds(const DotAnnotations& dots, Eigen::Index height,
                    Eigen::Index width) {
  const double h = static_cast<double>(height);
  const double w = static_cast<double>(width);
  return std::all_of(dots.begin(), dots.end(), [&](const Dot& d) {
    return d.x >= 0.0 && d.x < w && d.y >= 0.0 && d.y < h;
  });
}

DensityGrid render_density(const DotAnnotations& dots, Eigen::Index height,
                           Eigen::Index width, const KernelSpec& spec) {
  validate(spec);
  if (height < 1 || width < 1) {
    throw std::invalid_argument("density grid dimensions must be positive");
  }
  if (!dots_in_bounds(dots, height, width)) {
    throw ValidationError("dot outside the " + std::to_string(height) + "x" +
                          std::to_string(width) + " grid");
  }
  Grid out = Grid::Zero(height, width);
  if (dots.empty()) {
    return out;
  }
  const Grid kernel = gaussian_kernel(spec);
  const Eigen::Index r = spec.truncation_radius;
  for (const Dot& dot : dots) {
    const Eigen::Index cy = std::clamp<Eigen::Index>(
        static_cast<Eigen::Index>(std::lround(dot.y)), 0, height - 1);
    const Eigen::Index cx = std::clamp<Eigen::Index>(
        static_cast<Eigen::Index>(std::lround(dot.x)), 0, width - 1);
    const Eigen::Index r0 = std::max<Eigen::Index>(0, cy - r);
    const Eigen::Index r1 = std::min<Eigen::Index>(height - 1, cy + r);
    const Eigen::Index c0 = std::max<Eigen::Index>(0, cx - r);
    const Eigen::Index c1 = std::min<Eigen::Index>(width - 1, cx + r);
    const Eigen::Index nr = r1 - r0 + 1;
    const Eigen::Index nc = c1 - c0 + 1;
    const Eigen::Index kr0 = r0 - (cy - r);
    const Eigen::Index kc0 = c0 - (cx - r);
    const auto patch = kernel.block(kr0, kc0, nr, nc);
    out.block(r0, c0, nr, nc) += patch / patch.sum();
  }
  return out;
}

}  // namespace clip

#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace clip {

// Dense 2-D field. Rows index the vertical axis (y), columns the horizontal
// axis (x), so grid(y, x) addresses the pixel at column x of row y.
using Grid = Eigen::ArrayXXd;

// Intensities in [0, 1].
using ImageGrid = Grid;

// Non-negative field whose sum equals the annotated head count.
using DensityGrid = Grid;

// Head position in fractional pixel coordinates: x = column, y = row.
struct Dot {
  double x{0.0};
  double y{0.0};
};

using DotAnnotations = std::vector<Dot>;

struct Sample {
  std::string id;
  ImageGrid image;
  DotAnnotations dots;
  // Cached ground-truth density, same dimensions as the image when present.
  std::optional<DensityGrid> density;
};

struct Dataset {
  std::vector<Sample> samples;
  // Gaussian bandwidth (pixels) used for the cached ground-truth densities.
  double sigma{2.0};
};

// Error taxonomy. The CLI maps these to exit code 1 (runtime/data problems)
// and std::invalid_argument to exit code 2 (bad usage).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool dots_in_bounds(const DotAnnotations& dots, Eigen::Index height,
                    Eigen::Index width);

// Throws ValidationError naming the offending sample id.
void validate_sample(const Sample& sample);

// Checks every sample plus dataset-level rules (unique ids, sigma > 0).
void validate_dataset(const Dataset& dataset);

}  // namespace clip

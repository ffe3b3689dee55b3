#include "clip/synthdata.hpp"

#include "clip/density.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace clip {

namespace {

constexpr double kMinSeparation = 2.0;
constexpr int kMaxRetries = 100;

bool far_enough(const DotAnnotations& dots, double x, double y) {
  const double limit = kMinSeparation * kMinSeparation;
  return std::none_of(dots.begin(), dots.end(), [&](const Dot& d) {
    const double dx = d.x - x;
    const double dy = d.y - y;
    return dx * dx + dy * dy < limit;
  });
}

std::string scene_id(int index) {
  std::string digits = std::to_string(index);
  return "syn-" + std::string(6 - std::min<std::size_t>(6, digits.size()),
                              '0') +
         digits;
}

}  // namespace

void validate(const SceneConfig& config) {
  if (config.height < 16 || config.width < 16) {
    throw std::invalid_argument("scene sides must be at least 16 pixels");
  }
  if (config.count_min < 0 || config.count_min > config.count_max) {
    throw std::invalid_argument("scene count range must satisfy 0 <= min <= max");
  }
  if (!(config.blob_sigma > 0.0) || !(config.sigma_gt > 0.0)) {
    throw std::invalid_argument("scene bandwidths must be positive");
  }
  if (config.noise_std < 0.0) {
    throw std::invalid_argument("scene noise_std must be >= 0");
  }
}

Sample generate_scene(const SceneConfig& config, Rng& rng) {
  validate(config);
  const Eigen::Index h = config.height;
  const Eigen::Index w = config.width;

  const int count = uniform_int(rng, config.count_min, config.count_max);
  DotAnnotations dots;
  dots.reserve(count);
  for (int k = 0; k < count; ++k) {
    double x = 0.0;
    double y = 0.0;
    for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
      x = uniform_unit(rng) * static_cast<double>(w);
      y = uniform_unit(rng) * static_cast<double>(h);
      if (far_enough(dots, x, y)) {
        break;
      }
    }
    dots.push_back({x, y});
  }

  Grid image = Grid::Zero(h, w);
  const double inv = 1.0 / (2.0 * config.blob_sigma * config.blob_sigma);
  const double reach = 3.0 * config.blob_sigma;
  for (const Dot& d : dots) {
    const Eigen::Index r0 = std::max<Eigen::Index>(
        0, static_cast<Eigen::Index>(std::floor(d.y - reach)));
    const Eigen::Index r1 = std::min<Eigen::Index>(
        h - 1, static_cast<Eigen::Index>(std::ceil(d.y + reach)));
    const Eigen::Index c0 = std::max<Eigen::Index>(
        0, static_cast<Eigen::Index>(std::floor(d.x - reach)));
    const Eigen::Index c1 = std::min<Eigen::Index>(
        w - 1, static_cast<Eigen::Index>(std::ceil(d.x + reach)));
    for (Eigen::Index r = r0; r <= r1; ++r) {
      for (Eigen::Index c = c0; c <= c1; ++c) {
        const double dy = static_cast<double>(r) - d.y;
        const double dx = static_cast<double>(c) - d.x;
        image(r, c) += std::exp(-(dx * dx + dy * dy) * inv);
      }
    }
  }
  const double peak = image.maxCoeff();
  if (peak > 1.0) {
    image /= peak;
  }
  if (config.noise_std > 0.0) {
    for (Eigen::Index r = 0; r < h; ++r) {
      for (Eigen::Index c = 0; c < w; ++c) {
        image(r, c) += normal(rng, 0.0, config.noise_std);
      }
    }
  }
  image = (image.max(0.0).min(1.0) * 255.0).round() / 255.0;

  Sample sample;
  sample.image = std::move(image);
  sample.density =
      render_density(dots, h, w, KernelSpec(config.sigma_gt));
  sample.dots = std::move(dots);
  return sample;
}

Dataset generate_dataset(int n, const SceneConfig& config,
                         std::uint64_t seed) {
  if (n < 0) {
    throw std::invalid_argument("dataset size must be >= 0");
  }
  validate(config);
  Dataset ds;
  ds.sigma = config.sigma_gt;
  ds.samples.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng rng = seeded_rng(seed, streams::kSceneBase +
                                   static_cast<std::uint64_t>(i));
    Sample s = generate_scene(config, rng);
    s.id = scene_id(i);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace clip

#include "clip/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace clip {

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kRangeFloor = 1e-12;

const Grid& ssim_weights() {
  static const Grid weights = [] {
    const int r = kSsimWindow / 2;
    const double inv = 1.0 / (2.0 * kSsimSigma * kSsimSigma);
    Eigen::ArrayXd line(kSsimWindow);
    for (int i = 0; i < kSsimWindow; ++i) {
      const double d = static_cast<double>(i - r);
      line(i) = std::exp(-d * d * inv);
    }
    Grid w = (line.matrix() * line.matrix().transpose()).array();
    w /= w.sum();
    return w;
  }();
  return weights;
}

void require_same_shape(const Grid& a, const Grid& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(what) +
                                ": grid dimensions do not match");
  }
}

}  // namespace

double mae(std::span<const double> estimated, std::span<const double> truth) {
  if (estimated.size() != truth.size()) {
    throw std::invalid_argument("mae: input lengths do not match");
  }
  if (estimated.empty()) {
    throw std::invalid_argument("mae: empty input");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < estimated.size(); ++i) {
    total += std::abs(estimated[i] - truth[i]);
  }
  return total / static_cast<double>(estimated.size());
}

double game(const DensityGrid& predicted, const DensityGrid& truth,
            int level) {
  require_same_shape(predicted, truth, "game");
  if (level < 0) {
    throw std::invalid_argument("game: level must be >= 0");
  }
  if (level >= 30) {
    throw std::invalid_argument("game: level too large");
  }
  const Eigen::Index parts = Eigen::Index(1) << level;
  if (parts > predicted.rows() || parts > predicted.cols()) {
    throw std::invalid_argument(
        "game: 2^level exceeds the grid dimensions (level " +
        std::to_string(level) + " on " + std::to_string(predicted.rows()) +
        "x" + std::to_string(predicted.cols()) + ")");
  }
  const Eigen::Index base_h = predicted.rows() / parts;
  const Eigen::Index base_w = predicted.cols() / parts;
  double total = 0.0;
  for (Eigen::Index pi = 0; pi < parts; ++pi) {
    const Eigen::Index r0 = pi * base_h;
    const Eigen::Index nr =
        (pi == parts - 1) ? predicted.rows() - r0 : base_h;
    for (Eigen::Index pj = 0; pj < parts; ++pj) {
      const Eigen::Index c0 = pj * base_w;
      const Eigen::Index nc =
          (pj == parts - 1) ? predicted.cols() - c0 : base_w;
      total += std::abs(predicted.block(r0, c0, nr, nc).sum() -
                        truth.block(r0, c0, nr, nc).sum());
    }
  }
  return total;
}

double ssim(const DensityGrid& a, const DensityGrid& b) {
  require_same_shape(a, b, "ssim");
  if (a.rows() < kSsimWindow || a.cols() < kSsimWindow) {
    throw std::invalid_argument("ssim: grids must be at least " +
                                std::to_string(kSsimWindow) + "x" +
                                std::to_string(kSsimWindow));
  }
  const Grid& w = ssim_weights();
  const double range =
      std::max({a.maxCoeff(), b.maxCoeff(), kRangeFloor});
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);
  double total = 0.0;
  long windows = 0;
  for (Eigen::Index i = 0; i + kSsimWindow <= a.rows(); ++i) {
    for (Eigen::Index j = 0; j + kSsimWindow <= a.cols(); ++j) {
      const auto pa = a.block(i, j, kSsimWindow, kSsimWindow);
      const auto pb = b.block(i, j, kSsimWindow, kSsimWindow);
      const double mu_a = (w * pa).sum();
      const double mu_b = (w * pb).sum();
      const double var_a = (w * pa.square()).sum() - mu_a * mu_a;
      const double var_b = (w * pb.square()).sum() - mu_b * mu_b;
      const double cov = (w * pa * pb).sum() - mu_a * mu_b;
      total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
               ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

double psnr(const DensityGrid& predicted, const DensityGrid& truth) {
  require_same_shape(predicted, truth, "psnr");
  const double mse = (predicted - truth).square().mean();
  if (mse == 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  const double peak = std::max(truth.maxCoeff(), kRangeFloor);
  return 10.0 * std::log10(peak * peak / mse);
}

MetricsRecord evaluate(const std::vector<DensityGrid>& predictions,
                       const Dataset& dataset, int game_level) {
  if (dataset.samples.empty()) {
    throw std::invalid_argument("evaluate: empty dataset");
  }
  if (predictions.size() != dataset.samples.size()) {
    throw std::invalid_argument(
        "evaluate: prediction count does not match the dataset");
  }
  const std::size_t n = predictions.size();
  std::vector<double> predicted_counts(n);
  std::vector<double> true_counts(n);
  double game_total = 0.0;
  double ssim_total = 0.0;
  double psnr_total = 0.0;
  long psnr_finite = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Sample& s = dataset.samples[i];
    if (!s.density.has_value()) {
      throw ValidationError("sample '" + s.id + "' has no cached density");
    }
    predicted_counts[i] = predictions[i].sum();
    true_counts[i] = s.density->sum();
    game_total += game(predictions[i], *s.density, game_level);
    ssim_total += ssim(predictions[i], *s.density);
    const double p = psnr(predictions[i], *s.density);
    if (std::isfinite(p)) {
      psnr_total += p;
      ++psnr_finite;
    }
  }
  MetricsRecord record;
  record.mae = mae(predicted_counts, true_counts);
  record.game = game_total / static_cast<double>(n);
  record.ssim = ssim_total / static_cast<double>(n);
  record.psnr = psnr_finite > 0
                    ? psnr_total / static_cast<double>(psnr_finite)
                    : std::numeric_limits<double>::infinity();
  return record;
}

}  // namespace clip

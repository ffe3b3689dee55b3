#include "clip/model.hpp"

#include "bytes.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace clip {

namespace {

constexpr int kC1 = ModelParams::kConv1Out;
constexpr int kK1 = ModelParams::kConv1Kernel;
constexpr int kC2 = ModelParams::kConv2Out;
constexpr int kK2 = ModelParams::kConv2Kernel;
constexpr int kPad1 = kK1 / 2;
constexpr int kPad2 = kK2 / 2;
constexpr Eigen::Index kMinImageSide = kK1 + kK2 - 1;

using KernelMap = Eigen::Map<Grid>;
using ConstKernelMap = Eigen::Map<const Grid>;

ConstKernelMap conv1_weight(const Eigen::VectorXd& v, int out) {
  return ConstKernelMap(
      v.data() + ModelParams::kConv1WeightOffset + out * kK1 * kK1, kK1, kK1);
}

KernelMap conv1_weight(Eigen::VectorXd& v, int out) {
  return KernelMap(
      v.data() + ModelParams::kConv1WeightOffset + out * kK1 * kK1, kK1, kK1);
}

ConstKernelMap conv2_weight(const Eigen::VectorXd& v, int out, int in) {
  return ConstKernelMap(v.data() + ModelParams::kConv2WeightOffset +
                            (out * kC1 + in) * kK2 * kK2,
                        kK2, kK2);
}

KernelMap conv2_weight(Eigen::VectorXd& v, int out, int in) {
  return KernelMap(v.data() + ModelParams::kConv2WeightOffset +
                       (out * kC1 + in) * kK2 * kK2,
                   kK2, kK2);
}

// dst(i, j) += weight * src(i + dy, j + dx) over the in-bounds overlap.
void add_shifted(Grid& dst, const Grid& src, double weight, Eigen::Index dy,
                 Eigen::Index dx) {
  const Eigen::Index rows = dst.rows() - std::abs(dy);
  const Eigen::Index cols = dst.cols() - std::abs(dx);
  if (rows <= 0 || cols <= 0 || weight == 0.0) {
    return;
  }
  const Eigen::Index dst_r = std::max<Eigen::Index>(0, -dy);
  const Eigen::Index dst_c = std::max<Eigen::Index>(0, -dx);
  const Eigen::Index src_r = std::max<Eigen::Index>(0, dy);
  const Eigen::Index src_c = std::max<Eigen::Index>(0, dx);
  dst.block(dst_r, dst_c, rows, cols) +=
      weight * src.block(src_r, src_c, rows, cols);
}

// sum over the overlap of a(i, j) * b(i + dy, j + dx).
double shifted_dot(const Grid& a, const Grid& b, Eigen::Index dy,
                   Eigen::Index dx) {
  const Eigen::Index rows = a.rows() - std::abs(dy);
  const Eigen::Index cols = a.cols() - std::abs(dx);
  if (rows <= 0 || cols <= 0) {
    return 0.0;
  }
  const Eigen::Index a_r = std::max<Eigen::Index>(0, -dy);
  const Eigen::Index a_c = std::max<Eigen::Index>(0, -dx);
  const Eigen::Index b_r = std::max<Eigen::Index>(0, dy);
  const Eigen::Index b_c = std::max<Eigen::Index>(0, dx);
  return (a.block(a_r, a_c, rows, cols) * b.block(b_r, b_c, rows, cols))
      .sum();
}

struct ForwardCache {
  std::vector<Grid> pre1, act1;
  std::vector<Grid> pre2, act2;
  Grid pre3;
  Grid output;
};

ForwardCache run_forward(const ModelParams& params, const ImageGrid& image) {
  if (image.rows() < kMinImageSide || image.cols() < kMinImageSide) {
    throw std::invalid_argument(
        "forward: image must be at least " + std::to_string(kMinImageSide) +
        "x" + std::to_string(kMinImageSide));
  }
  const Eigen::Index h = image.rows();
  const Eigen::Index w = image.cols();
  const Eigen::VectorXd& v = params.values;
  ForwardCache cache;
  cache.pre1.reserve(kC1);
  cache.act1.reserve(kC1);
  for (int c = 0; c < kC1; ++c) {
    Grid z = Grid::Constant(h, w, v[ModelParams::kConv1BiasOffset + c]);
    const auto kernel = conv1_weight(v, c);
    for (int u = 0; u < kK1; ++u) {
      for (int t = 0; t < kK1; ++t) {
        add_shifted(z, image, kernel(u, t), u - kPad1, t - kPad1);
      }
    }
    cache.act1.push_back(z.max(0.0));
    cache.pre1.push_back(std::move(z));
  }
  cache.pre2.reserve(kC2);
  cache.act2.reserve(kC2);
  for (int d = 0; d < kC2; ++d) {
    Grid z = Grid::Constant(h, w, v[ModelParams::kConv2BiasOffset + d]);
    for (int c = 0; c < kC1; ++c) {
      const auto kernel = conv2_weight(v, d, c);
      for (int u = 0; u < kK2; ++u) {
        for (int t = 0; t < kK2; ++t) {
          add_shifted(z, cache.act1[c], kernel(u, t), u - kPad2, t - kPad2);
        }
      }
    }
    cache.act2.push_back(z.max(0.0));
    cache.pre2.push_back(std::move(z));
  }
  cache.pre3 = Grid::Constant(h, w, v[ModelParams::kHeadBiasOffset]);
  for (int d = 0; d < kC2; ++d) {
    cache.pre3 += v[ModelParams::kHeadWeightOffset + d] * cache.act2[d];
  }
  cache.output = cache.pre3.max(0.0);
  return cache;
}

// Accumulates this sample's parameter gradient given dL/d(output).
void accumulate_gradient(const ModelParams& params, const ImageGrid& image,
                         const ForwardCache& cache, const Grid& output_grad,
                         Eigen::VectorXd& grad) {
  const Eigen::Index h = image.rows();
  const Eigen::Index w = image.cols();
  const Eigen::VectorXd& v = params.values;

  const Grid dz3 = output_grad * (cache.pre3 > 0.0).cast<double>();
  grad[ModelParams::kHeadBiasOffset] += dz3.sum();
  std::vector<Grid> dact2(kC2);
  for (int d = 0; d < kC2; ++d) {
    grad[ModelParams::kHeadWeightOffset + d] += (dz3 * cache.act2[d]).sum();
    dact2[d] = v[ModelParams::kHeadWeightOffset + d] * dz3;
  }

  std::vector<Grid> dact1(kC1, Grid::Zero(h, w));
  for (int d = 0; d < kC2; ++d) {
    const Grid dz2 = dact2[d] * (cache.pre2[d] > 0.0).cast<double>();
    grad[ModelParams::kConv2BiasOffset + d] += dz2.sum();
    for (int c = 0; c < kC1; ++c) {
      const auto kernel = conv2_weight(v, d, c);
      double* kgrad = grad.data() + ModelParams::kConv2WeightOffset +
                      (d * kC1 + c) * kK2 * kK2;
      KernelMap kgrad_map(kgrad, kK2, kK2);
      for (int u = 0; u < kK2; ++u) {
        for (int t = 0; t < kK2; ++t) {
          kgrad_map(u, t) +=
              shifted_dot(dz2, cache.act1[c], u - kPad2, t - kPad2);
          add_shifted(dact1[c], dz2, kernel(u, t), kPad2 - u, kPad2 - t);
        }
      }
    }
  }

  for (int c = 0; c < kC1; ++c) {
    const Grid dz1 = dact1[c] * (cache.pre1[c] > 0.0).cast<double>();
    grad[ModelParams::kConv1BiasOffset + c] += dz1.sum();
    KernelMap kgrad_map(
        grad.data() + ModelParams::kConv1WeightOffset + c * kK1 * kK1, kK1,
        kK1);
    for (int u = 0; u < kK1; ++u) {
      for (int t = 0; t < kK1; ++t) {
        kgrad_map(u, t) += shifted_dot(dz1, image, u - kPad1, t - kPad1);
      }
    }
  }
}

const DensityGrid& required_density(const Sample& sample) {
  if (!sample.density.has_value()) {
    throw ValidationError("sample '" + sample.id +
                          "' has no cached density");
  }
  return *sample.density;
}

constexpr char kCheckpointMagic[] = "CLPM";
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

ModelParams init_model(std::uint64_t seed) {
  ModelParams params;
  Rng rng = seeded_rng(seed, streams::kModelInit);
  const auto fill = [&](int offset, int count, double bound) {
    for (int i = 0; i < count; ++i) {
      params.values[offset + i] = uniform_range(rng, -bound, bound);
    }
  };
  // Weights are uniform in [-s, s] with s = sqrt(6 / (fan_in + fan_out)).
  // Biases start at zero; a bias drawn as wide as the weights can push a
  // whole ReLU layer (worst of all, the scalar output head) into the dead
  // region at initialization, which freezes training permanently.
  const double bound1 =
      std::sqrt(6.0 / (kK1 * kK1 + kC1 * kK1 * kK1));
  fill(ModelParams::kConv1WeightOffset, kC1 * kK1 * kK1, bound1);
  const double bound2 =
      std::sqrt(6.0 / (kC1 * kK2 * kK2 + kC2 * kK2 * kK2));
  fill(ModelParams::kConv2WeightOffset, kC2 * kC1 * kK2 * kK2, bound2);
  const double bound3 = std::sqrt(6.0 / (kC2 + 1));
  fill(ModelParams::kHeadWeightOffset, kC2, bound3);
  return params;
}

DensityGrid forward(const ModelParams& params, const ImageGrid& image) {
  return run_forward(params, image).output;
}

double loss(const DensityGrid& predicted, const DensityGrid& truth) {
  if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols()) {
    throw std::invalid_argument("loss: grid dimensions do not match");
  }
  return (predicted - truth).square().sum();
}

double batch_loss(const ModelParams& params, std::span<const Sample> batch) {
  if (batch.empty()) {
    throw std::invalid_argument("batch_loss: empty batch");
  }
  double total = 0.0;
  for (const Sample& s : batch) {
    total += loss(forward(params, s.image), required_density(s));
  }
  return total / static_cast<double>(batch.size());
}

std::pair<double, Eigen::VectorXd> batch_loss_gradient(
    const ModelParams& params, std::span<const Sample> batch) {
  if (batch.empty()) {
    throw std::invalid_argument("batch_loss_gradient: empty batch");
  }
  double total = 0.0;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(ModelParams::kParamCount);
  for (const Sample& s : batch) {
    const DensityGrid& truth = required_density(s);
    const ForwardCache cache = run_forward(params, s.image);
    if (cache.output.rows() != truth.rows() ||
        cache.output.cols() != truth.cols()) {
      throw ValidationError("sample '" + s.id +
                            "' density dimensions do not match the image");
    }
    const Grid residual = cache.output - truth;
    total += residual.square().sum();
    const Grid output_grad = 2.0 * residual;
    accumulate_gradient(params, s.image, cache, output_grad, grad);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  grad *= inv;
  return {total * inv, std::move(grad)};
}

double train_batch(ModelParams& params, OptimizerState& optimizer,
                   std::span<const Sample> batch) {
  auto [value, grad] = batch_loss_gradient(params, batch);
  optimizer.step_count += 1;
  const double t = static_cast<double>(optimizer.step_count);
  optimizer.first_moment =
      optimizer.beta1 * optimizer.first_moment + (1.0 - optimizer.beta1) * grad;
  optimizer.second_moment = optimizer.beta2 * optimizer.second_moment +
                            (1.0 - optimizer.beta2) * grad.cwiseProduct(grad);
  const double correction1 = 1.0 - std::pow(optimizer.beta1, t);
  const double correction2 = 1.0 - std::pow(optimizer.beta2, t);
  const Eigen::ArrayXd m_hat = optimizer.first_moment.array() / correction1;
  const Eigen::ArrayXd v_hat = optimizer.second_moment.array() / correction2;
  params.values.array() -=
      optimizer.learning_rate * m_hat / (v_hat.sqrt() + optimizer.epsilon);
  return value;
}

Sample augment(const Sample& sample, const AugmentConfig& config, Rng& rng) {
  if (config.hflip_prob < 0.0 || config.hflip_prob > 1.0 ||
      config.brightness_delta < 0.0 ||
      config.contrast_min > config.contrast_max || config.contrast_min < 0.0) {
    throw std::invalid_argument("augment: bad configuration");
  }
  const double flip_draw = uniform_unit(rng);
  const double brightness_draw = uniform_unit(rng);
  const double contrast_draw = uniform_unit(rng);

  Sample out;
  out.id = sample.id;
  if (flip_draw < config.hflip_prob) {
    out.image = sample.image.rowwise().reverse();
    const double w = static_cast<double>(sample.image.cols());
    out.dots.reserve(sample.dots.size());
    for (const Dot& d : sample.dots) {
      out.dots.push_back({w - 1.0 - d.x, d.y});
    }
    if (sample.density.has_value()) {
      out.density = sample.density->rowwise().reverse();
    }
  } else {
    out.image = sample.image;
    out.dots = sample.dots;
    out.density = sample.density;
  }
  const double shift =
      (2.0 * brightness_draw - 1.0) * config.brightness_delta;
  const double scale =
      config.contrast_min +
      contrast_draw * (config.contrast_max - config.contrast_min);
  out.image = (out.image * scale + shift).max(0.0).min(1.0);
  return out;
}

void save_checkpoint(const ModelParams& params,
                     const std::filesystem::path& path) {
  std::string bytes;
  bytes.reserve(16 + ModelParams::kParamCount * 8);
  bytes.append(kCheckpointMagic, 4);
  detail::append_u32le(bytes, kCheckpointVersion);
  detail::append_u32le(bytes, ModelParams::kParamCount);
  detail::append_u32le(bytes, 0);
  for (int i = 0; i < ModelParams::kParamCount; ++i) {
    detail::append_f64le(bytes, params.values[i]);
  }
  detail::write_file(path, bytes);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  if (bytes.size() < 16 || bytes.compare(0, 4, kCheckpointMagic, 4) != 0) {
    throw FormatError(path.string() + ": not a model checkpoint");
  }
  const std::uint32_t version = detail::read_u32le(bytes, 4);
  const std::uint32_t count = detail::read_u32le(bytes, 8);
  if (version != kCheckpointVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " +
                      std::to_string(version));
  }
  if (count != ModelParams::kParamCount ||
      bytes.size() != 16 + static_cast<std::size_t>(count) * 8) {
    throw FormatError(path.string() + ": checkpoint parameter count/size " +
                      "mismatch");
  }
  ModelParams params;
  for (std::uint32_t i = 0; i < count; ++i) {
    params.values[i] = detail::read_f64le(bytes, 16 + i * 8);
  }
  return params;
}

}  // namespace clip

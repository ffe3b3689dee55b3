#include "clip/model.hpp"

#include "clip/density.hpp"
#include "clip/synthdata.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

using namespace clip;

namespace {

bool bitwise_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

Sample random_sample(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Sample s;
  s.id = "r";
  s.image = testing::random_grid(rng, rows, cols);
  s.density = 0.2 * testing::random_grid(rng, rows, cols);
  return s;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in),
          std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  REQUIRE(out.good());
}

}  // namespace

TEST_CASE("init_model is deterministic per seed with zero biases") {
  const ModelParams a = init_model(3);
  const ModelParams b = init_model(3);
  const ModelParams c = init_model(4);
  CHECK(bitwise_equal(a.values, b.values));
  CHECK_FALSE(bitwise_equal(a.values, c.values));
  CHECK(a.values.size() == ModelParams::kParamCount);

  const auto check_layer = [&](int weight_offset, int weight_count,
                               int bias_offset, int bias_count,
                               double bound) {
    double peak = 0.0;
    for (int i = 0; i < weight_count; ++i) {
      const double w = a.values[weight_offset + i];
      CHECK(std::abs(w) <= bound);
      peak = std::max(peak, std::abs(w));
    }
    // A degenerate draw near zero would hide indexing mistakes.
    CHECK(peak > 0.25 * bound);
    for (int i = 0; i < bias_count; ++i) {
      CHECK(a.values[bias_offset + i] == 0.0);
    }
  };
  check_layer(ModelParams::kConv1WeightOffset, 8 * 25,
              ModelParams::kConv1BiasOffset, 8, std::sqrt(6.0 / 225.0));
  check_layer(ModelParams::kConv2WeightOffset, 8 * 8 * 9,
              ModelParams::kConv2BiasOffset, 8, std::sqrt(6.0 / 144.0));
  check_layer(ModelParams::kHeadWeightOffset, 8,
              ModelParams::kHeadBiasOffset, 1, std::sqrt(6.0 / 9.0));
}

TEST_CASE("forward keeps resolution and never goes negative") {
  Rng rng = seeded_rng(21);
  const ModelParams params = init_model(2);
  const ImageGrid image = testing::random_grid(rng, 16, 20);
  const DensityGrid out = forward(params, image);
  CHECK(out.rows() == 16);
  CHECK(out.cols() == 20);
  CHECK((out >= 0.0).all());

  // With zero biases a zero image propagates zeros through every layer.
  CHECK((forward(params, Grid::Zero(12, 12)) == 0.0).all());
}

TEST_CASE("forward rejects images below the receptive field") {
  const ModelParams params = init_model(2);
  CHECK_NOTHROW(forward(params, Grid::Zero(7, 7)));
  CHECK_THROWS_AS(forward(params, Grid::Zero(6, 7)), std::invalid_argument);
  CHECK_THROWS_AS(forward(params, Grid::Zero(7, 6)), std::invalid_argument);
}

TEST_CASE("loss is the squared difference summed over cells") {
  Grid pred(2, 2);
  pred << 1.0, 2.0, 3.0, 4.0;
  Grid truth(2, 2);
  truth << 0.0, 2.0, 3.0, 2.0;
  CHECK(loss(pred, truth) == 5.0);
  CHECK(loss(truth, truth) == 0.0);
  CHECK_THROWS_AS(loss(pred, Grid::Zero(2, 3)), std::invalid_argument);
}

TEST_CASE("batch_loss averages per-sample losses") {
  Rng rng = seeded_rng(22);
  const ModelParams params = init_model(5);
  std::vector<Sample> batch;
  double expected = 0.0;
  for (int i = 0; i < 3; ++i) {
    batch.push_back(random_sample(rng, 10, 10));
    expected += loss(forward(params, batch.back().image),
                     *batch.back().density);
  }
  expected /= 3.0;
  CHECK(batch_loss(params, batch) == doctest::Approx(expected).epsilon(1e-12));
  CHECK_THROWS_AS(batch_loss(params, std::vector<Sample>{}),
                  std::invalid_argument);

  batch[1].density.reset();
  CHECK_THROWS_AS(batch_loss(params, batch), ValidationError);
}

TEST_CASE("analytic gradient matches central finite differences") {
  // Central differences are only trustworthy away from the relu kinks, so
  // the configurations are fixed ones whose pre-activations all clear the
  // step size by a wide margin.
  double worst = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    Rng rng = seeded_rng(100 + trial);
    Sample s;
    s.id = "g";
    s.image = Grid::NullaryExpr(9, 9, [&]() { return uniform_unit(rng); });
    s.density =
        Grid::NullaryExpr(9, 9, [&]() { return 0.2 * uniform_unit(rng); });
    ModelParams params = init_model(7 + trial);
    // Nudge biases off zero so their gradient paths are exercised too.
    for (int i = 0; i < ModelParams::kParamCount; ++i) {
      const bool is_bias =
          (i >= ModelParams::kConv1BiasOffset &&
           i < ModelParams::kConv2WeightOffset) ||
          (i >= ModelParams::kConv2BiasOffset &&
           i < ModelParams::kHeadWeightOffset) ||
          i == ModelParams::kHeadBiasOffset;
      if (is_bias) {
        params.values[i] = 0.05 * (uniform_unit(rng) - 0.3);
      }
    }

    const std::vector<Sample> batch{s};
    const auto [value, grad] = batch_loss_gradient(params, batch);
    CHECK(value == doctest::Approx(batch_loss(params, batch)).epsilon(1e-12));

    const double h = 1e-5;
    for (int p = 0; p < ModelParams::kParamCount; ++p) {
      ModelParams plus = params;
      ModelParams minus = params;
      plus.values[p] += h;
      minus.values[p] -= h;
      const double fd =
          (batch_loss(plus, batch) - batch_loss(minus, batch)) / (2.0 * h);
      const double rel = std::abs(grad[p] - fd) /
                         std::max({std::abs(grad[p]), std::abs(fd), 1e-4});
      worst = std::max(worst, rel);
    }
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("adam leaves parameters alone when nothing drives it") {
  Rng rng = seeded_rng(24);
  std::vector<Sample> batch{random_sample(rng, 12, 12)};

  SUBCASE("zero learning rate") {
    ModelParams params = init_model(8);
    const Eigen::VectorXd before = params.values;
    OptimizerState opt;
    opt.learning_rate = 0.0;
    const double reported = train_batch(params, opt, batch);
    CHECK(reported == doctest::Approx(batch_loss(ModelParams{before}, batch))
                          .epsilon(1e-12));
    train_batch(params, opt, batch);
    CHECK(bitwise_equal(params.values, before));
    CHECK(opt.step_count == 2);
  }

  SUBCASE("zero gradient at a perfect fit") {
    ModelParams params = init_model(8);
    batch[0].density = forward(params, batch[0].image);
    const Eigen::VectorXd before = params.values;
    OptimizerState opt;
    for (int step = 0; step < 3; ++step) {
      CHECK(train_batch(params, opt, batch) == 0.0);
    }
    CHECK(bitwise_equal(params.values, before));
  }
}

TEST_CASE("five hundred adam steps overfit a single scene") {
  Rng scene_rng = seeded_rng(11, streams::kSceneBase);
  Sample scene = generate_scene(SceneConfig{}, scene_rng);
  scene.id = "one";
  const std::vector<Sample> batch{scene};

  ModelParams params = init_model(1);
  OptimizerState opt;
  const double initial = batch_loss(params, batch);
  CHECK(initial == doctest::Approx(0.742398).epsilon(1e-4));

  double prev = initial;
  double last = initial;
  for (int step = 1; step <= 500; ++step) {
    last = train_batch(params, opt, batch);
    CHECK(last <= prev + 1e-12);
    prev = last;
  }
  CHECK(last < 0.1 * initial);
  CHECK(last > 0.0);
}

TEST_CASE("augment consumes a fixed number of draws per call") {
  Rng rng = seeded_rng(25);
  const Sample s = random_sample(rng, 10, 10);
  AugmentConfig always_flip;
  always_flip.hflip_prob = 1.0;
  AugmentConfig never_flip;
  never_flip.hflip_prob = 0.0;

  Rng r1 = seeded_rng(26);
  Rng r2 = seeded_rng(26);
  augment(s, always_flip, r1);
  augment(s, never_flip, r2);
  CHECK(r1() == r2());
}

TEST_CASE("a forced flip with neutral photometry is an exact involution") {
  Rng rng = seeded_rng(27);
  Sample s;
  s.id = "inv";
  // 8-bit-quantized intensities survive the [0, 1] clamp bit-for-bit, and
  // dots on eighths of a pixel mirror without rounding.
  s.image = (testing::random_grid(rng, 14, 32) * 255.0).round() / 255.0;
  for (const Dot& d : testing::random_dots(rng, 9, 14, 32)) {
    s.dots.push_back({std::min(std::round(d.x * 8.0) / 8.0, 31.0),
                      std::min(std::round(d.y * 8.0) / 8.0, 13.0)});
  }
  s.density = render_density(s.dots, 14, 32, KernelSpec(2.0));

  AugmentConfig config;
  config.hflip_prob = 1.0;
  config.brightness_delta = 0.0;
  config.contrast_min = 1.0;
  config.contrast_max = 1.0;

  Rng r = seeded_rng(28);
  const Sample once = augment(s, config, r);
  CHECK(once.id == s.id);
  CHECK(once.dots.size() == s.dots.size());
  CHECK_FALSE((once.image == s.image).all());
  // Mirrored mass is the same mass.
  CHECK(once.density->sum() ==
        doctest::Approx(s.density->sum()).epsilon(1e-12));

  const Sample twice = augment(once, config, r);
  CHECK((twice.image == s.image).all());
  CHECK((*twice.density == *s.density).all());
  for (std::size_t i = 0; i < s.dots.size(); ++i) {
    CHECK(twice.dots[i].x == s.dots[i].x);
    CHECK(twice.dots[i].y == s.dots[i].y);
  }
}

TEST_CASE("augment mirrors dots around the vertical centerline") {
  Sample s;
  s.id = "edge";
  s.image = Grid::Zero(8, 32);
  s.dots.push_back({0.0, 3.0});
  s.dots.push_back({10.5, 1.0});

  AugmentConfig config;
  config.hflip_prob = 1.0;
  config.brightness_delta = 0.0;
  config.contrast_min = 1.0;
  config.contrast_max = 1.0;

  Rng r = seeded_rng(29);
  const Sample flipped = augment(s, config, r);
  CHECK(flipped.dots[0].x == 31.0);
  CHECK(flipped.dots[0].y == 3.0);
  CHECK(flipped.dots[1].x == 20.5);
}

TEST_CASE("augment clamps photometric shifts into the unit interval") {
  Rng rng = seeded_rng(30);
  Sample s = random_sample(rng, 10, 10);
  AugmentConfig config;
  config.hflip_prob = 0.0;
  config.brightness_delta = 0.8;
  config.contrast_min = 0.5;
  config.contrast_max = 1.5;
  for (int i = 0; i < 20; ++i) {
    const Sample out = augment(s, config, rng);
    CHECK((out.image >= 0.0).all());
    CHECK((out.image <= 1.0).all());
  }
}

TEST_CASE("augment rejects bad configurations") {
  Rng rng = seeded_rng(32);
  const Sample s = random_sample(rng, 10, 10);
  AugmentConfig config;
  config.hflip_prob = 1.5;
  CHECK_THROWS_AS(augment(s, config, rng), std::invalid_argument);
  config = {};
  config.brightness_delta = -0.1;
  CHECK_THROWS_AS(augment(s, config, rng), std::invalid_argument);
  config = {};
  config.contrast_min = 1.2;
  config.contrast_max = 0.8;
  CHECK_THROWS_AS(augment(s, config, rng), std::invalid_argument);
}

TEST_CASE("checkpoints round trip bitwise") {
  testing::TempDir dir;
  const ModelParams params = init_model(9);
  const auto path = dir / "model.clpm";
  save_checkpoint(params, path);
  const ModelParams loaded = load_checkpoint(path);
  CHECK(bitwise_equal(loaded.values, params.values));
}

TEST_CASE("checkpoint loading rejects damaged files") {
  testing::TempDir dir;
  const ModelParams params = init_model(10);
  const auto path = dir / "model.clpm";
  save_checkpoint(params, path);
  const std::string good = slurp(path);

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint(dir / "absent.clpm"), IoError);
  }
  SUBCASE("truncated payload") {
    spit(path, good.substr(0, good.size() - 8));
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  }
  SUBCASE("wrong magic") {
    std::string bad = good;
    bad[0] = 'X';
    spit(path, bad);
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  }
  SUBCASE("unsupported version") {
    std::string bad = good;
    bad[4] = 2;
    spit(path, bad);
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  }
  SUBCASE("wrong parameter count") {
    std::string bad = good;
    bad[8] = static_cast<char>(bad[8] - 1);
    spit(path, bad);
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  }
}

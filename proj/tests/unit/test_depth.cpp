#include <doctest.h>

#include "depthstyle/depth.hpp"
#include "depthstyle/synthetic.hpp"
#include "support/gradcheck.hpp"
#include "support/tempdir.hpp"

using namespace depthstyle;
using depthstyle::testing::check_input_gradient;
using depthstyle::testing::random_tensor;

TEST_CASE("depth estimator contracts") {
  const auto net = ConvDepthNet<float>::stub({}, 21);
  const auto x = synth::scene(256, 256, 3);
  const auto d1 = estimate_depth(*net, x);
  const auto d2 = estimate_depth(*net, x);
  CHECK(d1.shape() == Tensor<float>::Shape{1, 1, 256, 256});
  CHECK(d1 == d2);
  CHECK(d1.flat().minCoeff() >= 0.0f);
  CHECK_THROWS_AS(estimate_depth(*net, Tensor<float>(1, 1, 32, 32)), ArgumentError);
  const auto odd = estimate_depth(*net, synth::scene(50, 70, 1));
  CHECK(odd.shape() == Tensor<float>::Shape{1, 1, 50, 70});
}

TEST_CASE("depth map separates a foreground object from its background") {
  // Bright disk on a dark field; region means recorded as golden values.
  Tensor<float> img(1, 3, 128, 128);
  for (Index y = 0; y < 128; ++y)
    for (Index x = 0; x < 128; ++x) {
      const bool fg = (y - 80) * (y - 80) + (x - 64) * (x - 64) < 30 * 30;
      for (Index c = 0; c < 3; ++c) img(0, c, y, x) = fg ? 0.85f : 0.15f + 0.001f * static_cast<float>(y);
    }
  const auto d = estimate_depth(*ConvDepthNet<float>::stub({}, 21), img);
  double fg = 0, bg = 0;
  int nf = 0, nb = 0;
  for (Index y = 0; y < 128; ++y)
    for (Index x = 0; x < 128; ++x) {
      const auto r2 = (y - 80) * (y - 80) + (x - 64) * (x - 64);
      if (r2 < 20 * 20) fg += d(0, 0, y, x), ++nf;
      else if (r2 > 40 * 40) bg += d(0, 0, y, x), ++nb;
    }
  fg /= nf;
  bg /= nb;
  const auto f = d.flat().cast<double>().array();
  CHECK((f - f.mean()).square().mean() > 0.0);
  CHECK(std::abs(fg - bg) > 1e-3);
  // Golden values for the seed-21 stand-in backbone.
  CHECK(fg == doctest::Approx(0.963732).epsilon(1e-4));
  CHECK(bg == doctest::Approx(0.0794473).epsilon(1e-4));
}

TEST_CASE("depth loss examples") {
  const ChannelDepth<double> stub;
  Eager<double> ops;
  const auto x = random_tensor<double>(1, 1, 2, 2, 1);
  Tensor<double> shifted = x;
  shifted.flat().array() += 1.0;
  CHECK(depth_loss(ops, stub, x, x).item() == 0.0);
  CHECK(depth_loss(ops, stub, shifted, x).item() == doctest::Approx(1.0).epsilon(1e-12));

  const auto net = ConvDepthNet<double>::stub({}, 21);
  const auto a = synth::scene(64, 64, 1).cast<double>(), b = synth::scene(64, 64, 2).cast<double>();
  const double ab = depth_loss(ops, *net, a, b).item(), ba = depth_loss(ops, *net, b, a).item();
  CHECK(ab > 0.0);
  CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
  CHECK(depth_loss(ops, *net, a, a).item() == 0.0);
  CHECK_THROWS_AS(depth_loss(ops, *net, a, Tensor<double>(1, 3, 32, 64)), ArgumentError);

  // Min-max variant ignores a per-image affine change of the map.
  Tensor<double> scaled = x;
  scaled.flat() = 3.0 * x.flat().array() + 2.0;
  CHECK(depth_loss(ops, stub, scaled, x, true).item() < 1e-12);
  CHECK(depth_loss(ops, stub, scaled, x, false).item() > 0.1);
}

TEST_CASE("depth loss is zero iff the maps coincide") {
  const ChannelDepth<double> stub;
  Eager<double> ops;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto a = random_tensor<double>(1, 3, 8, 8, seed);
    auto b = a;
    CHECK(depth_loss(ops, stub, a, b).item() == 0.0);
    // Other channels do not enter the map.
    b.plane(0, 2).array() += 1.0;
    CHECK(depth_loss(ops, stub, a, b).item() == 0.0);
    b(0, 0, seed % 8, 3) += 0.25;
    CHECK(depth_loss(ops, stub, a, b).item() > 0.0);
  }
}

TEST_CASE("depth loss gradients") {
  const auto x = random_tensor<double>(1, 3, 32, 32, 30, 0.0, 1.0);
  const auto y_hat = random_tensor<double>(1, 3, 32, 32, 31, 0.0, 1.0);
  const ChannelDepth<double> stub;
  auto f = [&](auto& ops, auto v) { return depth_loss(ops, stub, v, ops.constant(x)); };
  CHECK(check_input_gradient<double>(f, y_hat, 20, 1e-6, 1).max_rel_error < 1e-2);

  DepthNetConfig small;
  small.native_size = 32;
  small.widths = {4, 8};
  const auto net = ConvDepthNet<double>::stub(small, 3);
  const auto before = net->checksum();
  auto g = [&](auto& ops, auto v) { return depth_loss(ops, *net, v, ops.constant(x)); };
  CHECK(check_input_gradient<double>(g, y_hat, 20, 1e-6, 2).max_rel_error < 1e-2);
  CHECK(net->checksum() == before);
}

TEST_CASE("depth net archive and backend selection") {
  depthstyle::testing::TempDir dir("depth");
  const auto net = ConvDepthNet<float>::stub({}, 5);
  net->save(dir / "d.dsa");
  const auto loaded = ConvDepthNet<float>::load(dir / "d.dsa");
  CHECK(loaded->checksum() == net->checksum());

  DepthSpec spec;
  spec.backend = "convnet";
  spec.weights = dir / "d.dsa";
  spec.sha256 = sha256_file(spec.weights);
  CHECK(make_depth_estimator<float>(spec)->checksum() == net->checksum());
  spec.sha256 = std::string(64, '0');
  CHECK_THROWS_AS(make_depth_estimator<float>(spec), IntegrityError);
  spec.weights = dir / "missing.dsa";
  CHECK_THROWS_AS(make_depth_estimator<float>(spec), SetupError);
  spec.backend = "midas-large";
  CHECK_THROWS_AS(make_depth_estimator<float>(spec), ConfigError);
  spec.backend = "channel";
  CHECK(make_depth_estimator<float>(spec)->name() == "channel");
}

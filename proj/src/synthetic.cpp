#include "depthstyle/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "depthstyle/image_io.hpp"
#include "depthstyle/rng.hpp"

namespace depthstyle::synth {

namespace {

struct Rgb {
  double r, g, b;
};

Rgb random_color(Rng& rng, double lo = 0.0, double hi = 1.0) {
  return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

Rgb mix(const Rgb& a, const Rgb& b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

void put(Tensor<float>& t, Index y, Index x, const Rgb& c) {
  t(0, 0, y, x) = static_cast<float>(std::clamp(c.r, 0.0, 1.0));
  t(0, 1, y, x) = static_cast<float>(std::clamp(c.g, 0.0, 1.0));
  t(0, 2, y, x) = static_cast<float>(std::clamp(c.b, 0.0, 1.0));
}

Rgb get(const Tensor<float>& t, Index y, Index x) { return {t(0, 0, y, x), t(0, 1, y, x), t(0, 2, y, x)}; }

}  // namespace

Tensor<float> scene(Index h, Index w, std::uint64_t seed) {
  if (h < 1 || w < 1) throw ArgumentError("scene size must be positive");
  Rng rng(seed);
  Tensor<float> img(1, 3, h, w);
  const double horizon = rng.uniform(0.3, 0.6) * static_cast<double>(h);
  const Rgb sky_top = random_color(rng, 0.2, 0.7), sky_low = random_color(rng, 0.6, 1.0);
  const Rgb ground_far = random_color(rng, 0.3, 0.8), ground_near = random_color(rng, 0.0, 0.5);
  const Rgb stripe = random_color(rng);
  const double stripe_freq = rng.uniform(2.0, 6.0), stripe_phase = rng.uniform(0.0, 6.3);
  const double tilt = rng.uniform(-0.5, 0.5);

  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      const double fy = static_cast<double>(y) + 0.5, fx = static_cast<double>(x) + 0.5;
      Rgb c;
      if (fy < horizon) {
        c = mix(sky_top, sky_low, fy / horizon);
      } else {
        // Perspective: row distance ~ 1 / (y - horizon), texture compresses toward the horizon.
        const double dy = std::max(fy - horizon, 0.5);
        const double z = static_cast<double>(h) / dy;
        const double u = (fx - 0.5 * static_cast<double>(w)) / dy + tilt * z;
        const double t = 0.5 + 0.5 * std::sin(stripe_freq * z + stripe_phase) * std::cos(3.0 * u);
        c = mix(mix(ground_far, ground_near, std::min(1.0, dy / (static_cast<double>(h) - horizon + 1.0))), stripe,
                0.35 * t);
      }
      put(img, y, x, c);
    }

  // Objects drawn far to near so nearer ones occlude.
  const int objects = 1 + static_cast<int>(rng.below(4));
  struct Obj {
    double base, cx, size;
    Rgb color;
    bool disk;
  };
  std::vector<Obj> objs;
  for (int i = 0; i < objects; ++i) {
    const double base = rng.uniform(horizon + 0.1 * (h - horizon), static_cast<double>(h));
    const double near = (base - horizon) / std::max(1.0, static_cast<double>(h) - horizon);
    objs.push_back({base, rng.uniform(0.1, 0.9) * static_cast<double>(w),
                    (0.08 + 0.3 * near) * static_cast<double>(std::min(h, w)), random_color(rng), rng.below(2) == 0});
  }
  std::sort(objs.begin(), objs.end(), [](const Obj& a, const Obj& b) { return a.base < b.base; });
  for (const auto& o : objs) {
    const double cy = o.base - o.size;
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x) {
        const double dx = (static_cast<double>(x) + 0.5 - o.cx) / o.size;
        const double dy = (static_cast<double>(y) + 0.5 - cy) / o.size;
        const bool inside = o.disk ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 0.8 && std::abs(dy) <= 1.0;
        if (!inside) continue;
        // Lambert-like shading from the upper left.
        const double shade = std::clamp(0.75 - 0.35 * (dx + dy) * 0.5, 0.3, 1.1);
        put(img, y, x, mix(get(img, y, x), {o.color.r * shade, o.color.g * shade, o.color.b * shade}, 0.95));
      }
  }

  for (Index i = 0; i < img.size(); ++i)
    img.data()[i] = std::clamp(img.data()[i] + static_cast<float>(0.02 * rng.normal()), 0.0f, 1.0f);
  return img;
}

Tensor<float> style_pattern(Index h, Index w, std::uint64_t seed) {
  if (h < 1 || w < 1) throw ArgumentError("pattern size must be positive");
  Rng rng(seed);
  Tensor<float> img(1, 3, h, w);
  const int waves = 4;
  struct Wave {
    double kx, ky, phase;
    Rgb color;
  };
  std::vector<Wave> ws;
  for (int i = 0; i < waves; ++i) {
    const double angle = rng.uniform(0.0, std::numbers::pi), freq = rng.uniform(0.05, 0.25);
    ws.push_back({freq * std::cos(angle), freq * std::sin(angle), rng.uniform(0.0, 6.3), random_color(rng)});
  }
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      Rgb c{0, 0, 0};
      for (const auto& wv : ws) {
        const double s = 0.5 + 0.5 * std::sin(wv.kx * static_cast<double>(x) + wv.ky * static_cast<double>(y) + wv.phase);
        const double a = s * s * s;
        c.r += a * wv.color.r / 2.0;
        c.g += a * wv.color.g / 2.0;
        c.b += a * wv.color.b / 2.0;
      }
      put(img, y, x, c);
    }
  // Short bright strokes.
  const int strokes = 40;
  for (int i = 0; i < strokes; ++i) {
    const Rgb col = random_color(rng, 0.3, 1.0);
    const double x0 = rng.uniform(0.0, static_cast<double>(w)), y0 = rng.uniform(0.0, static_cast<double>(h));
    const double angle = rng.uniform(0.0, 2 * std::numbers::pi), len = rng.uniform(0.05, 0.2) * static_cast<double>(w);
    const double width = rng.uniform(1.0, 3.0);
    for (double t = 0; t < len; t += 0.5)
      for (double o = -width; o <= width; o += 0.5) {
        const auto x = static_cast<Index>(x0 + t * std::cos(angle) - o * std::sin(angle));
        const auto y = static_cast<Index>(y0 + t * std::sin(angle) + o * std::cos(angle));
        if (x >= 0 && x < w && y >= 0 && y < h) put(img, y, x, col);
      }
  }
  return img;
}

std::vector<std::filesystem::path> write_scene_set(const std::filesystem::path& dir, int count, Index min_side,
                                                   Index max_side, std::uint64_t seed) {
  if (count < 0 || min_side < 1 || max_side < min_side) throw ArgumentError("invalid scene-set parameters");
  std::filesystem::create_directories(dir);
  Rng sizes(derive_seed(seed, 0));
  std::vector<std::filesystem::path> out;
  const auto span = static_cast<std::uint64_t>(max_side - min_side + 1);
  for (int i = 0; i < count; ++i) {
    const Index h = min_side + static_cast<Index>(sizes.below(span));
    const Index w = min_side + static_cast<Index>(sizes.below(span));
    char name[32];
    std::snprintf(name, sizeof name, "scene_%05d.png", i);
    out.push_back(dir / name);
    write_image(out.back(), scene(h, w, derive_seed(seed, 1 + static_cast<std::uint64_t>(i))));
  }
  return out;
}

}  // namespace depthstyle::synth

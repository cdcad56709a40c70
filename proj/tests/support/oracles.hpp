#pragma once

// Direct re-implementations of metric definitions, written independently of src/.

#include <cmath>
#include <cstdint>

#include "depthstyle/tensor.hpp"

namespace depthstyle::testing {

using Plane = RowMatrix<double>;

/// Area resize by integer supersampling: replicate every pixel oh x ow times, then
/// average blocks of (H x W) replicated pixels.
inline Plane brute_area(const Plane& img, Index oh, Index ow) {
  const Index H = img.rows(), W = img.cols();
  Plane out = Plane::Zero(oh, ow);
  for (Index r = 0; r < oh; ++r)
    for (Index c = 0; c < ow; ++c) {
      long double s = 0;
      for (Index y = r * H; y < (r + 1) * H; ++y)
        for (Index x = c * W; x < (c + 1) * W; ++x) s += img(y / oh, x / ow);
      out(r, c) = static_cast<double>(s / static_cast<long double>(H * W));
    }
  return out;
}

inline std::uint64_t brute_ahash(const Plane& img) {
  const Plane s = brute_area(img, 8, 8);
  double mean = 0;
  for (Index r = 0; r < 8; ++r)
    for (Index c = 0; c < 8; ++c) mean += s(r, c);
  mean /= 64;
  std::uint64_t h = 0;
  for (int i = 0; i < 64; ++i)
    if (s(i / 8, i % 8) > mean) h |= std::uint64_t{1} << (63 - i);
  return h;
}

inline std::uint64_t brute_dhash(const Plane& img) {
  const Plane s = brute_area(img, 8, 9);
  std::uint64_t h = 0;
  for (int i = 0; i < 64; ++i)
    if (s(i / 8, i % 8) > s(i / 8, i % 8 + 1)) h |= std::uint64_t{1} << (63 - i);
  return h;
}

/// SSIM with explicit per-window sums (11x11 Gaussian, sigma 1.5, K1 0.01, K2 0.03, L 1).
inline double brute_ssim(const Plane& a, const Plane& b) {
  double g[11][11], total = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) total += g[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double acc = 0;
  int n = 0;
  for (Index y = 0; y + 11 <= a.rows(); ++y)
    for (Index x = 0; x + 11 <= a.cols(); ++x) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double w = g[i][j] / total, va = a(y + i, x + j), vb = b(y + i, x + j);
          ma += w * va;
          mb += w * vb;
          saa += w * va * va;
          sbb += w * vb * vb;
          sab += w * va * vb;
        }
      const double var_a = saa - ma * ma, var_b = sbb - mb * mb, cov = sab - ma * mb;
      acc += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
      ++n;
    }
  return acc / n;
}

}  // namespace depthstyle::testing

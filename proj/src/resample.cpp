#include "depthstyle/resample.hpp"

#include <algorithm>
#include <cmath>

namespace depthstyle {

namespace {

void check_sizes(Index in, Index out) {
  if (in < 1 || out < 1) throw ArgumentError("resample sizes must be positive");
}

double keys_cubic(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1) return ((a + 2) * t - (a + 3)) * t * t + 1;
  if (t < 2) return ((a * t - 5 * a) * t + 8 * a) * t - 4 * a;
  return 0;
}

GrayImage apply(const GrayImage& img, const RowMatrix<double>& wy, const RowMatrix<double>& wx) {
  return wy * img * wx.transpose();
}

}  // namespace

// Overlap counts in units of 1/(in*out): input cell i spans
// [i*out, (i+1)*out) and output cell o spans [o*in, (o+1)*in). Entries are integers.
RowMatrix<double> area_overlap(Index in, Index out) {
  check_sizes(in, out);
  RowMatrix<double> w = RowMatrix<double>::Zero(out, in);
  for (Index o = 0; o < out; ++o) {
    const Index lo = o * in, hi = lo + in;
    for (Index i = lo / out; i < in && i * out < hi; ++i)
      w(o, i) = static_cast<double>(std::min(hi, (i + 1) * out) - std::max(lo, i * out));
  }
  return w;
}

RowMatrix<double> area_weights(Index in, Index out) { return area_overlap(in, out) / static_cast<double>(in); }

RowMatrix<double> bicubic_weights(Index in, Index out) {
  check_sizes(in, out);
  RowMatrix<double> w = RowMatrix<double>::Zero(out, in);
  const double s = static_cast<double>(in) / static_cast<double>(out);
  for (Index o = 0; o < out; ++o) {
    const double src = (static_cast<double>(o) + 0.5) * s - 0.5;
    const auto base = static_cast<Index>(std::floor(src));
    for (Index k = base - 1; k <= base + 2; ++k) w(o, std::clamp<Index>(k, 0, in - 1)) += keys_cubic(src - static_cast<double>(k));
    w.row(o) /= w.row(o).sum();
  }
  return w;
}

RowMatrix<double> comparison_weights(Index in, Index out) {
  if (in == out) return RowMatrix<double>::Identity(in, in);
  return out < in ? area_weights(in, out) : bicubic_weights(in, out);
}

GrayImage resize_area(const GrayImage& img, Index h, Index w) {
  // Integer weights with a single final division keep plateaus exactly flat.
  const GrayImage sums = apply(img, area_overlap(img.rows(), h), area_overlap(img.cols(), w));
  return sums / static_cast<double>(img.rows() * img.cols());
}

GrayImage resize_for_comparison(const GrayImage& img, Index h, Index w) {
  return apply(img, comparison_weights(img.rows(), h), comparison_weights(img.cols(), w));
}

Tensor<double> resize_image_for_comparison(const Tensor<double>& unit, Index h, Index w) {
  const auto wy = comparison_weights(unit.height(), h), wx = comparison_weights(unit.width(), w);
  Tensor<double> out(1, unit.channels(), h, w);
  for (Index c = 0; c < unit.channels(); ++c)
    out.plane(0, c) = apply(unit.plane(0, c), wy, wx).cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

}  // namespace depthstyle

#pragma once

// Forward and backward primitives over Tensor<Scalar>. These are the only
// places that touch raw layouts; everything else composes them through ops.hpp.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "depthstyle/tensor.hpp"

namespace depthstyle::kernels {

enum class PadMode { Zero, Reflect };

struct ConvSpec {
  Index stride = 1;
  Index pad = 0;
  PadMode pad_mode = PadMode::Zero;
};

inline Index conv_out_size(Index in, Index k, Index stride, Index pad) { return (in + 2 * pad - k) / stride + 1; }

namespace detail {

inline Index reflect_index(Index i, Index n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

template <typename Scalar>
void im2col(const Scalar* in, Index channels, Index height, Index width, Index k, Index stride, Index out_h,
            Index out_w, Scalar* cols, Index oy0 = 0, Index oy1 = -1) {
  if (oy1 < 0) oy1 = out_h;
  const Index out_size = (oy1 - oy0) * out_w;
  for (Index c = 0; c < channels; ++c)
    for (Index ky = 0; ky < k; ++ky)
      for (Index kx = 0; kx < k; ++kx) {
        Scalar* dst = cols + ((c * k + ky) * k + kx) * out_size;
        for (Index oy = oy0; oy < oy1; ++oy) {
          const Scalar* src = in + (c * height + oy * stride + ky) * width + kx;
          Scalar* row = dst + (oy - oy0) * out_w;
          if (stride == 1) {
            std::copy(src, src + out_w, row);
          } else {
            for (Index ox = 0; ox < out_w; ++ox) row[ox] = src[ox * stride];
          }
        }
      }
}

template <typename Scalar>
void col2im(const Scalar* cols, Index channels, Index height, Index width, Index k, Index stride, Index out_h,
            Index out_w, Scalar* out, Index oy0 = 0, Index oy1 = -1) {
  if (oy1 < 0) oy1 = out_h;
  const Index out_size = (oy1 - oy0) * out_w;
  for (Index c = 0; c < channels; ++c)
    for (Index ky = 0; ky < k; ++ky)
      for (Index kx = 0; kx < k; ++kx) {
        const Scalar* src = cols + ((c * k + ky) * k + kx) * out_size;
        for (Index oy = oy0; oy < oy1; ++oy) {
          Scalar* dst = out + (c * height + oy * stride + ky) * width + kx;
          const Scalar* row = src + (oy - oy0) * out_w;
          if (stride == 1) {
            for (Index ox = 0; ox < out_w; ++ox) dst[ox] += row[ox];
          } else {
            for (Index ox = 0; ox < out_w; ++ox) dst[ox * stride] += row[ox];
          }
        }
      }
}

// Output rows per im2col tile, keeping the column buffer near kTileFloats.
inline Index tile_rows(Index patch, Index out_h, Index out_w) {
  constexpr Index kTileFloats = Index{1} << 19;
  return std::clamp<Index>(kTileFloats / std::max<Index>(1, patch * out_w), 1, out_h);
}

}  // namespace detail

/// Pads height and width by `pad` on every side.
template <typename Scalar>
Tensor<Scalar> pad2d(const Tensor<Scalar>& x, Index pad, PadMode mode) {
  if (pad == 0) return x;
  const Index h = x.height(), w = x.width();
  if (mode == PadMode::Reflect && (pad >= h || pad >= w))
    throw ArgumentError("reflection padding " + std::to_string(pad) + " too large for " + shape_string(x));
  Tensor<Scalar> out(x.batch(), x.channels(), h + 2 * pad, w + 2 * pad);
  for (Index n = 0; n < x.batch(); ++n)
    for (Index c = 0; c < x.channels(); ++c) {
      auto src = x.plane(n, c);
      auto dst = out.plane(n, c);
      if (mode == PadMode::Zero) {
        dst.block(pad, pad, h, w) = src;
        continue;
      }
      for (Index y = 0; y < h + 2 * pad; ++y) {
        const Index sy = detail::reflect_index(y - pad, h);
        for (Index xx = 0; xx < w + 2 * pad; ++xx) dst(y, xx) = src(sy, detail::reflect_index(xx - pad, w));
      }
    }
  return out;
}

/// Adjoint of pad2d: folds the padded gradient back onto the source grid.
template <typename Scalar>
Tensor<Scalar> pad2d_backward(const Tensor<Scalar>& grad_padded, Index pad, PadMode mode) {
  if (pad == 0) return grad_padded;
  const Index h = grad_padded.height() - 2 * pad, w = grad_padded.width() - 2 * pad;
  Tensor<Scalar> out(grad_padded.batch(), grad_padded.channels(), h, w);
  for (Index n = 0; n < out.batch(); ++n)
    for (Index c = 0; c < out.channels(); ++c) {
      auto src = grad_padded.plane(n, c);
      auto dst = out.plane(n, c);
      if (mode == PadMode::Zero) {
        dst = src.block(pad, pad, h, w);
        continue;
      }
      for (Index y = 0; y < h + 2 * pad; ++y) {
        const Index sy = detail::reflect_index(y - pad, h);
        for (Index xx = 0; xx < w + 2 * pad; ++xx) dst(sy, detail::reflect_index(xx - pad, w)) += src(y, xx);
      }
    }
  return out;
}

/// Cross-correlation. weight is (out, in, k, k); bias is (1, out, 1, 1) or empty.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias,
                      const ConvSpec& spec) {
  const Index out_c = weight.batch(), in_c = weight.channels(), k = weight.height();
  if (x.channels() != in_c || weight.width() != k)
    throw ArgumentError("conv2d: input " + shape_string(x) + " incompatible with weight " + shape_string(weight));
  const Tensor<Scalar> padded = pad2d(x, spec.pad, spec.pad_mode);
  const Index hp = padded.height(), wp = padded.width();
  if (hp < k || wp < k) throw ArgumentError("conv2d: input smaller than kernel");
  const Index oh = (hp - k) / spec.stride + 1, ow = (wp - k) / spec.stride + 1;
  Tensor<Scalar> out(x.batch(), out_c, oh, ow);
  Eigen::Map<const RowMatrix<Scalar>> wmat(weight.data(), out_c, in_c * k * k);
  const Index patch = in_c * k * k, rows = detail::tile_rows(patch, oh, ow);
  RowMatrix<Scalar> cols(patch, rows * ow);
  for (Index n = 0; n < x.batch(); ++n) {
    auto y = out.instance(n);
    for (Index r0 = 0; r0 < oh; r0 += rows) {
      const Index r1 = std::min(oh, r0 + rows), span = (r1 - r0) * ow;
      detail::im2col(padded.data() + n * padded.instance_size(), in_c, hp, wp, k, spec.stride, oh, ow, cols.data(),
                     r0, r1);
      y.middleCols(r0 * ow, span).noalias() = wmat * Eigen::Map<const RowMatrix<Scalar>>(cols.data(), patch, span);
    }
    if (!bias.empty()) y.colwise() += Eigen::Map<const Vector<Scalar>>(bias.data(), out_c);
  }
  return out;
}

/// Gradients of conv2d. Any output pointer may be null; weight/bias grads accumulate.
template <typename Scalar>
void conv2d_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const Tensor<Scalar>& grad_out,
                     const ConvSpec& spec, Tensor<Scalar>* grad_x, Tensor<Scalar>* grad_w, Tensor<Scalar>* grad_b) {
  const Index out_c = weight.batch(), in_c = weight.channels(), k = weight.height();
  const Index oh = grad_out.height(), ow = grad_out.width();
  Eigen::Map<const RowMatrix<Scalar>> wmat(weight.data(), out_c, in_c * k * k);
  Tensor<Scalar> padded;
  if (grad_w) padded = pad2d(x, spec.pad, spec.pad_mode);
  Tensor<Scalar> grad_padded;
  if (grad_x) grad_padded = Tensor<Scalar>(x.batch(), in_c, x.height() + 2 * spec.pad, x.width() + 2 * spec.pad);
  const Index hp = x.height() + 2 * spec.pad, wp = x.width() + 2 * spec.pad;
  const Index patch = in_c * k * k, rows = detail::tile_rows(patch, oh, ow);
  RowMatrix<Scalar> cols(patch, rows * ow);
  for (Index n = 0; n < x.batch(); ++n) {
    auto dy = grad_out.instance(n);
    if (grad_b) Eigen::Map<Vector<Scalar>>(grad_b->data(), out_c) += dy.rowwise().sum();
    for (Index r0 = 0; r0 < oh; r0 += rows) {
      const Index r1 = std::min(oh, r0 + rows), span = (r1 - r0) * ow;
      const auto dy_tile = dy.middleCols(r0 * ow, span);
      Eigen::Map<RowMatrix<Scalar>> tile(cols.data(), patch, span);
      if (grad_w) {
        detail::im2col(padded.data() + n * padded.instance_size(), in_c, hp, wp, k, spec.stride, oh, ow, cols.data(),
                       r0, r1);
        Eigen::Map<RowMatrix<Scalar>>(grad_w->data(), out_c, patch).noalias() +=
            dy_tile * tile.transpose();
      }
      if (grad_x) {
        tile.noalias() = wmat.transpose() * dy_tile;
        detail::col2im(cols.data(), in_c, hp, wp, k, spec.stride, oh, ow,
                       grad_padded.data() + n * grad_padded.instance_size(), r0, r1);
      }
    }
  }
  if (grad_x) *grad_x = pad2d_backward(grad_padded, spec.pad, spec.pad_mode);
}

struct TransposedConvSpec {
  Index stride = 2;
  Index pad = 1;
  Index output_pad = 1;
};

inline Index transposed_out_size(Index in, Index k, const TransposedConvSpec& s) {
  return (in - 1) * s.stride - 2 * s.pad + k + s.output_pad;
}

/// Transposed convolution with zero padding. weight is (in, out, k, k).
template <typename Scalar>
Tensor<Scalar> conv_transpose2d(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias,
                                const TransposedConvSpec& spec) {
  const Index in_c = weight.batch(), out_c = weight.channels(), k = weight.height();
  if (x.channels() != in_c) throw ArgumentError("conv_transpose2d: channel mismatch");
  const Index h = x.height(), w = x.width();
  const Index oh = transposed_out_size(h, k, spec), ow = transposed_out_size(w, k, spec);
  const Index canvas_h = std::max((h - 1) * spec.stride + k, spec.pad + oh);
  const Index canvas_w = std::max((w - 1) * spec.stride + k, spec.pad + ow);
  Eigen::Map<const RowMatrix<Scalar>> wmat(weight.data(), in_c, out_c * k * k);
  Tensor<Scalar> out(x.batch(), out_c, oh, ow);
  Tensor<Scalar> canvas(1, out_c, canvas_h, canvas_w);
  RowMatrix<Scalar> cols(out_c * k * k, h * w);
  for (Index n = 0; n < x.batch(); ++n) {
    cols.noalias() = wmat.transpose() * x.instance(n);
    canvas.flat().setZero();
    detail::col2im(cols.data(), out_c, canvas_h, canvas_w, k, spec.stride, h, w, canvas.data());
    for (Index c = 0; c < out_c; ++c) {
      out.plane(n, c) = canvas.plane(0, c).block(spec.pad, spec.pad, oh, ow);
      if (!bias.empty()) out.plane(n, c).array() += bias.data()[c];
    }
  }
  return out;
}

template <typename Scalar>
void conv_transpose2d_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const Tensor<Scalar>& grad_out,
                               const TransposedConvSpec& spec, Tensor<Scalar>* grad_x, Tensor<Scalar>* grad_w,
                               Tensor<Scalar>* grad_b) {
  const Index in_c = weight.batch(), out_c = weight.channels(), k = weight.height();
  const Index h = x.height(), w = x.width();
  const Index oh = grad_out.height(), ow = grad_out.width();
  const Index canvas_h = std::max((h - 1) * spec.stride + k, spec.pad + oh);
  const Index canvas_w = std::max((w - 1) * spec.stride + k, spec.pad + ow);
  Eigen::Map<const RowMatrix<Scalar>> wmat(weight.data(), in_c, out_c * k * k);
  if (grad_x) *grad_x = Tensor<Scalar>(x.shape());
  Tensor<Scalar> canvas(1, out_c, canvas_h, canvas_w);
  RowMatrix<Scalar> cols(out_c * k * k, h * w);
  for (Index n = 0; n < x.batch(); ++n) {
    canvas.flat().setZero();
    for (Index c = 0; c < out_c; ++c) {
      canvas.plane(0, c).block(spec.pad, spec.pad, oh, ow) = grad_out.plane(n, c);
      if (grad_b) grad_b->data()[c] += grad_out.plane(n, c).sum();
    }
    detail::im2col(canvas.data(), out_c, canvas_h, canvas_w, k, spec.stride, h, w, cols.data());
    if (grad_x) grad_x->instance(n).noalias() = wmat * cols;
    if (grad_w) Eigen::Map<RowMatrix<Scalar>>(grad_w->data(), in_c, out_c * k * k).noalias() +=
        x.instance(n) * cols.transpose();
  }
}

/// Per-(instance, channel) statistics kept for the instance-norm backward pass.
template <typename Scalar>
struct InstanceNormCache {
  Tensor<Scalar> normalized;  // pre-affine activations
  std::vector<Scalar> inv_std;
};

/// y = gamma_c * (x - mean_nc) / sqrt(var_nc + eps) + beta_c, statistics over the spatial plane.
template <typename Scalar>
Tensor<Scalar> instance_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gamma, const Tensor<Scalar>& beta,
                             Scalar eps, InstanceNormCache<Scalar>* cache = nullptr) {
  const Index c_count = x.channels();
  if (gamma.size() != c_count || beta.size() != c_count)
    throw ConfigError("instance_norm: gamma/beta length must equal channel count " + std::to_string(c_count));
  if (!(eps > Scalar(0))) throw ConfigError("instance_norm: epsilon must be positive");
  Tensor<Scalar> out(x.shape());
  if (cache) {
    cache->normalized = Tensor<Scalar>(x.shape());
    cache->inv_std.assign(static_cast<std::size_t>(x.batch() * c_count), Scalar(0));
  }
  const Index m = x.plane_size();
  for (Index n = 0; n < x.batch(); ++n)
    for (Index c = 0; c < c_count; ++c) {
      auto src = x.instance(n).row(c).array();
      const Scalar mean = src.sum() / Scalar(m);
      const Scalar var = (src - mean).square().sum() / Scalar(m);
      const Scalar inv = Scalar(1) / std::sqrt(var + eps);
      auto dst = out.instance(n).row(c).array();
      dst = (src - mean) * inv;
      if (cache) {
        cache->normalized.instance(n).row(c) = out.instance(n).row(c);
        cache->inv_std[static_cast<std::size_t>(n * c_count + c)] = inv;
      }
      dst = dst * gamma.data()[c] + beta.data()[c];
    }
  return out;
}

template <typename Scalar>
void instance_norm_backward(const InstanceNormCache<Scalar>& cache, const Tensor<Scalar>& gamma,
                            const Tensor<Scalar>& grad_out, Tensor<Scalar>* grad_x, Tensor<Scalar>* grad_gamma,
                            Tensor<Scalar>* grad_beta) {
  const Index c_count = grad_out.channels();
  const Index m = grad_out.plane_size();
  if (grad_x) *grad_x = Tensor<Scalar>(grad_out.shape());
  for (Index n = 0; n < grad_out.batch(); ++n)
    for (Index c = 0; c < c_count; ++c) {
      auto dy = grad_out.instance(n).row(c).array();
      auto xhat = cache.normalized.instance(n).row(c).array();
      if (grad_gamma) grad_gamma->data()[c] += (dy * xhat).sum();
      if (grad_beta) grad_beta->data()[c] += dy.sum();
      if (grad_x) {
        const Scalar g = gamma.data()[c];
        const Scalar inv = cache.inv_std[static_cast<std::size_t>(n * c_count + c)];
        const Scalar mean_dy = dy.sum() / Scalar(m);
        const Scalar mean_dy_xhat = (dy * xhat).sum() / Scalar(m);
        grad_x->instance(n).row(c).array() = g * inv * (dy - mean_dy - xhat * mean_dy_xhat);
      }
    }
}

template <typename Scalar>
Tensor<Scalar> upsample_nearest(const Tensor<Scalar>& x, Index factor) {
  Tensor<Scalar> out(x.batch(), x.channels(), x.height() * factor, x.width() * factor);
  const Index w = x.width(), ow = w * factor;
  const Index rows = x.batch() * x.channels() * x.height();
  for (Index r = 0; r < rows; ++r) {
    const Scalar* src = x.data() + r * w;
    Scalar* dst = out.data() + r * factor * ow;
    for (Index xx = 0; xx < w; ++xx)
      for (Index f = 0; f < factor; ++f) dst[xx * factor + f] = src[xx];
    for (Index f = 1; f < factor; ++f) std::copy(dst, dst + ow, dst + f * ow);
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> upsample_nearest_backward(const Tensor<Scalar>& grad_out, Index factor) {
  Tensor<Scalar> out(grad_out.batch(), grad_out.channels(), grad_out.height() / factor, grad_out.width() / factor);
  const Index w = out.width(), gw = grad_out.width();
  const Index rows = out.batch() * out.channels() * out.height();
  for (Index r = 0; r < rows; ++r) {
    Scalar* dst = out.data() + r * w;
    for (Index f = 0; f < factor; ++f) {
      const Scalar* src = grad_out.data() + (r * factor + f) * gw;
      for (Index xx = 0; xx < w; ++xx)
        for (Index g = 0; g < factor; ++g) dst[xx] += src[xx * factor + g];
    }
  }
  return out;
}

/// 2x2 max pooling with stride 2; argmax holds the flat source index of each output.
template <typename Scalar>
Tensor<Scalar> max_pool2(const Tensor<Scalar>& x, std::vector<Index>* argmax = nullptr) {
  const Index oh = x.height() / 2, ow = x.width() / 2;
  if (oh == 0 || ow == 0) throw ArgumentError("max_pool2: input too small " + shape_string(x));
  Tensor<Scalar> out(x.batch(), x.channels(), oh, ow);
  if (argmax) argmax->resize(static_cast<std::size_t>(out.size()));
  Index o = 0;
  for (Index n = 0; n < x.batch(); ++n)
    for (Index c = 0; c < x.channels(); ++c) {
      const Index base = (n * x.channels() + c) * x.plane_size();
      for (Index y = 0; y < oh; ++y)
        for (Index xx = 0; xx < ow; ++xx, ++o) {
          Index best = base + (2 * y) * x.width() + 2 * xx;
          for (Index dy = 0; dy < 2; ++dy)
            for (Index dx = 0; dx < 2; ++dx) {
              const Index i = base + (2 * y + dy) * x.width() + 2 * xx + dx;
              if (x.data()[i] > x.data()[best]) best = i;
            }
          out.data()[o] = x.data()[best];
          if (argmax) (*argmax)[static_cast<std::size_t>(o)] = best;
        }
    }
  return out;
}

template <typename Scalar>
Tensor<Scalar> max_pool2_backward(const std::array<Index, 4>& in_shape, const std::vector<Index>& argmax,
                                  const Tensor<Scalar>& grad_out) {
  Tensor<Scalar> out(in_shape);
  for (Index o = 0; o < grad_out.size(); ++o) out.data()[argmax[static_cast<std::size_t>(o)]] += grad_out.data()[o];
  return out;
}

/// Linear interpolation taps along one axis (half-pixel centres, edge clamped).
struct LinearTaps {
  std::vector<Index> lo, hi;
  std::vector<double> frac;
};

inline LinearTaps linear_taps(Index in, Index out) {
  LinearTaps t;
  t.lo.resize(static_cast<std::size_t>(out));
  t.hi.resize(static_cast<std::size_t>(out));
  t.frac.resize(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (Index i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    Index lo = static_cast<Index>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    const Index hi = std::min(lo + 1, in - 1);
    t.lo[static_cast<std::size_t>(i)] = lo;
    t.hi[static_cast<std::size_t>(i)] = hi;
    t.frac[static_cast<std::size_t>(i)] = src - static_cast<double>(lo);
  }
  return t;
}

template <typename Scalar>
Tensor<Scalar> resize_bilinear(const Tensor<Scalar>& x, Index out_h, Index out_w) {
  if (x.height() == out_h && x.width() == out_w) return x;
  const LinearTaps ty = linear_taps(x.height(), out_h), tx = linear_taps(x.width(), out_w);
  Tensor<Scalar> out(x.batch(), x.channels(), out_h, out_w);
  for (Index n = 0; n < x.batch(); ++n)
    for (Index c = 0; c < x.channels(); ++c) {
      auto src = x.plane(n, c);
      auto dst = out.plane(n, c);
      for (Index y = 0; y < out_h; ++y) {
        const auto yi = static_cast<std::size_t>(y);
        const Scalar fy = static_cast<Scalar>(ty.frac[yi]);
        for (Index xx = 0; xx < out_w; ++xx) {
          const auto xi = static_cast<std::size_t>(xx);
          const Scalar fx = static_cast<Scalar>(tx.frac[xi]);
          const Scalar top = src(ty.lo[yi], tx.lo[xi]) * (1 - fx) + src(ty.lo[yi], tx.hi[xi]) * fx;
          const Scalar bot = src(ty.hi[yi], tx.lo[xi]) * (1 - fx) + src(ty.hi[yi], tx.hi[xi]) * fx;
          dst(y, xx) = top * (1 - fy) + bot * fy;
        }
      }
    }
  return out;
}

template <typename Scalar>
Tensor<Scalar> resize_bilinear_backward(const Tensor<Scalar>& grad_out, Index in_h, Index in_w) {
  if (grad_out.height() == in_h && grad_out.width() == in_w) return grad_out;
  const LinearTaps ty = linear_taps(in_h, grad_out.height()), tx = linear_taps(in_w, grad_out.width());
  Tensor<Scalar> out(grad_out.batch(), grad_out.channels(), in_h, in_w);
  for (Index n = 0; n < out.batch(); ++n)
    for (Index c = 0; c < out.channels(); ++c) {
      auto g = grad_out.plane(n, c);
      auto dst = out.plane(n, c);
      for (Index y = 0; y < g.rows(); ++y) {
        const auto yi = static_cast<std::size_t>(y);
        const Scalar fy = static_cast<Scalar>(ty.frac[yi]);
        for (Index xx = 0; xx < g.cols(); ++xx) {
          const auto xi = static_cast<std::size_t>(xx);
          const Scalar fx = static_cast<Scalar>(tx.frac[xi]);
          const Scalar v = g(y, xx);
          dst(ty.lo[yi], tx.lo[xi]) += v * (1 - fy) * (1 - fx);
          dst(ty.lo[yi], tx.hi[xi]) += v * (1 - fy) * fx;
          dst(ty.hi[yi], tx.lo[xi]) += v * fy * (1 - fx);
          dst(ty.hi[yi], tx.hi[xi]) += v * fy * fx;
        }
      }
    }
  return out;
}

/// Per-instance Gram matrices, (N, 1, C, C), normalised by C*H*W.
template <typename Scalar>
Tensor<Scalar> gram(const Tensor<Scalar>& features) {
  const Index c = features.channels();
  if (c < 1 || features.plane_size() < 1) throw ArgumentError("gram: empty activation " + shape_string(features));
  const Scalar norm = Scalar(1) / static_cast<Scalar>(features.instance_size());
  Tensor<Scalar> out(features.batch(), 1, c, c);
  for (Index n = 0; n < features.batch(); ++n) {
    auto f = features.instance(n);
    auto g = out.plane(n, 0);
    g.noalias() = f * f.transpose();
    g *= norm;
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> gram_backward(const Tensor<Scalar>& features, const Tensor<Scalar>& grad_gram) {
  const Scalar norm = Scalar(1) / static_cast<Scalar>(features.instance_size());
  Tensor<Scalar> out(features.shape());
  for (Index n = 0; n < features.batch(); ++n) {
    auto g = grad_gram.plane(n, 0);
    RowMatrix<Scalar> sym = g + g.transpose();
    out.instance(n).noalias() = norm * sym * features.instance(n);
  }
  return out;
}

/// Reflection-pads only the bottom and right edges.
template <typename Scalar>
Tensor<Scalar> pad_reflect_bottom_right(const Tensor<Scalar>& x, Index pad_h, Index pad_w) {
  const Index h = x.height(), w = x.width();
  if (pad_h >= h || pad_w >= w) throw ArgumentError("reflection padding too large for " + shape_string(x));
  Tensor<Scalar> out(x.batch(), x.channels(), h + pad_h, w + pad_w);
  for (Index n = 0; n < x.batch(); ++n)
    for (Index c = 0; c < x.channels(); ++c) {
      auto src = x.plane(n, c);
      auto dst = out.plane(n, c);
      for (Index y = 0; y < h + pad_h; ++y)
        for (Index xx = 0; xx < w + pad_w; ++xx)
          dst(y, xx) = src(detail::reflect_index(y, h), detail::reflect_index(xx, w));
    }
  return out;
}

/// Top-left (h, w) window of every plane.
template <typename Scalar>
Tensor<Scalar> crop(const Tensor<Scalar>& x, Index h, Index w) {
  Tensor<Scalar> out(x.batch(), x.channels(), h, w);
  for (Index n = 0; n < x.batch(); ++n)
    for (Index c = 0; c < x.channels(); ++c) out.plane(n, c) = x.plane(n, c).block(0, 0, h, w);
  return out;
}

inline void check_finite_or_throw(bool finite, const std::string& where) {
  if (!finite) throw NumericalError("non-finite activation in " + where);
}

}  // namespace depthstyle::kernels

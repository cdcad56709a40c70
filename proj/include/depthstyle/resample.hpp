#pragma once

// Separable resampling of 2-D planes: out = Wy * in * Wx^T, where each axis gets its
// own (out x in) weight matrix.

#include "depthstyle/tensor.hpp"

namespace depthstyle {

using GrayImage = RowMatrix<double>;

/// Box-filter weights: output cell o covers input span [o*s, (o+1)*s) with s = in/out,
/// and each input cell contributes in proportion to its overlap.
RowMatrix<double> area_weights(Index in, Index out);

/// Keys cubic convolution (a = -0.5) at half-pixel centres, borders clamped, rows normalised.
RowMatrix<double> bicubic_weights(Index in, Index out);

/// Area when an axis shrinks, bicubic when it grows, identity when unchanged.
RowMatrix<double> comparison_weights(Index in, Index out);

GrayImage resize_area(const GrayImage& img, Index h, Index w);
GrayImage resize_for_comparison(const GrayImage& img, Index h, Index w);

/// Applies resize_for_comparison to every plane of batch element 0; values clamped to [0, 1].
Tensor<double> resize_image_for_comparison(const Tensor<double>& unit, Index h, Index w);

}  // namespace depthstyle

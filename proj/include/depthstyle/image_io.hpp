#pragma once

// Image file codecs. Decoded images are unit-range (1,C,H,W) float tensors in RGB order.

#include <filesystem>
#include <vector>

#include "depthstyle/tensor.hpp"

namespace depthstyle {

enum class ColorMode { Rgb, Gray };

/// Decodes `path`. Throws FormatError when the file is missing or cannot be decoded.
Tensor<float> read_image(const std::filesystem::path& path, ColorMode mode = ColorMode::Rgb);

/// Encodes batch element 0 of a unit-range tensor (1 or 3 channels) with 8 bits per
/// channel. The format follows the extension; values are clamped and rounded.
void write_image(const std::filesystem::path& path, const Tensor<float>& unit);

/// Writes a single plane as a 16-bit grayscale PNG, min-max mapped to [0, 65535].
/// A constant plane maps to zero.
void write_gray16(const std::filesystem::path& path, const RowMatrix<double>& plane);

/// Reads a 16-bit (or 8-bit) grayscale file back into [0, 1].
RowMatrix<double> read_gray(const std::filesystem::path& path);

bool has_image_extension(const std::filesystem::path& path);

/// Regular files under `dir` with an image extension, sorted by path. Not recursive.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace depthstyle

#pragma once

// Structure-preservation metrics on [0,1] grayscale planes.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "depthstyle/resample.hpp"

namespace depthstyle {

/// Luma 0.299 R + 0.587 G + 0.114 B of batch element `n`; 1-channel inputs pass through.
GrayImage decolorize(const Tensor<double>& unit, Index n = 0);
GrayImage decolorize(const ImageTensor<double>& image, Index n = 0);

struct SsimParams {
  Index window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// Mean SSIM over all fully contained windows. Both planes must share dims of at
/// least window x window.
double ssim(const GrayImage& a, const GrayImage& b, const SsimParams& p = {});

/// Normalised 256-bin histogram, bin = round(v * 255).
Eigen::VectorXd gray_histogram(const GrayImage& img);

/// Pearson correlation of the two histograms. When either histogram has zero
/// variance across bins the result is 1.0 for identical histograms and 0.0 otherwise.
double hist_similarity(const GrayImage& a, const GrayImage& b);

enum class HashAlgo { AHash, DHash };
std::string to_string(HashAlgo a);

struct HashDigest {
  std::uint64_t bits = 0;
  HashAlgo algo = HashAlgo::AHash;
  friend bool operator==(const HashDigest&, const HashDigest&) = default;
};

/// Area resize to 8x8; bit r*8+c (MSB first) set when the cell strictly exceeds the mean.
HashDigest ahash(const GrayImage& img);
/// Area resize to 9 wide x 8 tall; bit r*8+c set when pixel[r][c] > pixel[r][c+1].
HashDigest dhash(const GrayImage& img);

int hamming_distance(const HashDigest& a, const HashDigest& b);
/// 1 - Hamming / 64. Digests must come from the same algorithm.
double hash_similarity(const HashDigest& a, const HashDigest& b);

/// Maps a unit-range (1,C,H,W) image to a [0,1] saliency map of the same H x W.
class SaliencyBackend {
 public:
  virtual ~SaliencyBackend() = default;
  virtual std::string name() const = 0;
  virtual GrayImage compute(const Tensor<double>& unit) const = 0;
};

/// Spectral residual of the log-amplitude spectrum at a 64x64 working size.
class SpectralResidualSaliency final : public SaliencyBackend {
 public:
  std::string name() const override { return "spectral-residual"; }
  GrayImage compute(const Tensor<double>& unit) const override;

  static constexpr Index kWorkingSize = 64;
  static constexpr double kBlurSigma = 2.5;
};

using SaliencyFactory = std::function<std::unique_ptr<SaliencyBackend>()>;

/// Registers `factory` under `name`, replacing any previous registration.
void register_saliency_backend(const std::string& name, SaliencyFactory factory);
std::vector<std::string> saliency_backends();
/// Throws ConfigError for an unknown backend name.
std::unique_ptr<SaliencyBackend> make_saliency_backend(const std::string& name);

GrayImage saliency(const Tensor<double>& unit, const std::string& backend = "spectral-residual");

/// Per-image min-max map to [0,1]; constant planes map to zero.
GrayImage minmax_normalize(const GrayImage& img);

/// Separable Gaussian blur with clamped borders and radius ceil(3 sigma).
GrayImage gaussian_blur(const GrayImage& img, double sigma);

}  // namespace depthstyle

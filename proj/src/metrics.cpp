#include "depthstyle/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>

#include <unsupported/Eigen/FFT>

namespace depthstyle {

namespace {

Eigen::VectorXd gaussian_kernel(Index size, double sigma) {
  Eigen::VectorXd k(size);
  const double c = static_cast<double>(size - 1) / 2.0;
  for (Index i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - c;
    k[i] = std::exp(-d * d / (2 * sigma * sigma));
  }
  return k / k.sum();
}

// "Valid" separable correlation with kernel k along both axes.
GrayImage filter_valid(const GrayImage& img, const Eigen::VectorXd& k) {
  const Index n = k.size(), oh = img.rows() - n + 1, ow = img.cols() - n + 1;
  GrayImage rows(img.rows(), ow);
  for (Index x = 0; x < ow; ++x) rows.col(x) = img.middleCols(x, n) * k;
  GrayImage out(oh, ow);
  for (Index y = 0; y < oh; ++y) out.row(y) = k.transpose() * rows.middleRows(y, n);
  return out;
}

// Same-size separable correlation with clamped borders.
GrayImage filter_clamped(const GrayImage& img, const Eigen::VectorXd& k) {
  const Index r = k.size() / 2, h = img.rows(), w = img.cols();
  GrayImage tmp(h, w), out(h, w);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      double s = 0;
      for (Index i = 0; i < k.size(); ++i) s += k[i] * img(y, std::clamp<Index>(x + i - r, 0, w - 1));
      tmp(y, x) = s;
    }
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      double s = 0;
      for (Index i = 0; i < k.size(); ++i) s += k[i] * tmp(std::clamp<Index>(y + i - r, 0, h - 1), x);
      out(y, x) = s;
    }
  return out;
}

void check_gray(const GrayImage& g, const char* what) {
  if (!g.allFinite()) throw ArgumentError(std::string(what) + ": non-finite values");
}

using ComplexMatrix = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

ComplexMatrix fft2(const ComplexMatrix& in, bool inverse) {
  Eigen::FFT<double> fft;
  ComplexMatrix out = in;
  Eigen::VectorXcd src, dst;
  for (Index r = 0; r < out.rows(); ++r) {
    src = out.row(r).transpose();
    inverse ? fft.inv(dst, src) : fft.fwd(dst, src);
    out.row(r) = dst.transpose();
  }
  for (Index c = 0; c < out.cols(); ++c) {
    src = out.col(c);
    inverse ? fft.inv(dst, src) : fft.fwd(dst, src);
    out.col(c) = dst;
  }
  return out;
}

std::map<std::string, SaliencyFactory>& registry() {
  static std::map<std::string, SaliencyFactory> r{
      {"spectral-residual", [] { return std::make_unique<SpectralResidualSaliency>(); }}};
  return r;
}

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

GrayImage decolorize(const Tensor<double>& unit, Index n) {
  if (n < 0 || n >= unit.batch()) throw ArgumentError("decolorize: batch index out of range");
  if (unit.channels() == 1) return unit.plane(n, 0);
  if (unit.channels() != 3) throw ArgumentError("decolorize needs 1 or 3 channels");
  return 0.299 * unit.plane(n, 0) + 0.587 * unit.plane(n, 1) + 0.114 * unit.plane(n, 2);
}

GrayImage decolorize(const ImageTensor<double>& image, Index n) {
  image.validate();
  return decolorize(image.unit(), n);
}

double ssim(const GrayImage& a, const GrayImage& b, const SsimParams& p) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ArgumentError("ssim: dims " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                        std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  if (a.rows() < p.window || a.cols() < p.window)
    throw ArgumentError("ssim needs at least " + std::to_string(p.window) + "x" + std::to_string(p.window) + " pixels");
  check_gray(a, "ssim");
  check_gray(b, "ssim");
  const Eigen::VectorXd k = gaussian_kernel(p.window, p.sigma);
  const double c1 = std::pow(p.k1 * p.dynamic_range, 2), c2 = std::pow(p.k2 * p.dynamic_range, 2);
  const GrayImage mu_a = filter_valid(a, k), mu_b = filter_valid(b, k);
  const GrayImage aa = filter_valid(a.cwiseProduct(a), k), bb = filter_valid(b.cwiseProduct(b), k);
  const GrayImage ab = filter_valid(a.cwiseProduct(b), k);
  const auto ma = mu_a.array(), mb = mu_b.array();
  const Eigen::ArrayXXd var_a = aa.array() - ma.square(), var_b = bb.array() - mb.square();
  const Eigen::ArrayXXd cov = ab.array() - ma * mb;
  const auto map = ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma.square() + mb.square() + c1) * (var_a + var_b + c2));
  return map.mean();
}

Eigen::VectorXd gray_histogram(const GrayImage& img) {
  check_gray(img, "histogram");
  Eigen::VectorXd h = Eigen::VectorXd::Zero(256);
  for (Index i = 0; i < img.size(); ++i) {
    const double v = std::clamp(img.data()[i], 0.0, 1.0);
    h[static_cast<Index>(std::lround(v * 255.0))] += 1.0;
  }
  if (img.size() > 0) h /= static_cast<double>(img.size());
  return h;
}

double hist_similarity(const GrayImage& a, const GrayImage& b) {
  const Eigen::VectorXd ha = gray_histogram(a), hb = gray_histogram(b);
  const Eigen::ArrayXd da = ha.array() - ha.mean(), db = hb.array() - hb.mean();
  const double va = da.square().sum(), vb = db.square().sum();
  if (va <= 0 || vb <= 0) return ha == hb ? 1.0 : 0.0;
  // Constant planes (a single occupied bin) follow the same rule.
  const auto single_bin = [](const Eigen::VectorXd& h) { return (h.array() > 0).count() == 1; };
  if (single_bin(ha) || single_bin(hb)) return ha == hb ? 1.0 : 0.0;
  return (da * db).sum() / std::sqrt(va * vb);
}

std::string to_string(HashAlgo a) { return a == HashAlgo::AHash ? "aHash" : "dHash"; }

HashDigest ahash(const GrayImage& img) {
  if (img.rows() < 9 || img.cols() < 9) throw ArgumentError("hashes need at least 9x9 pixels");
  check_gray(img, "ahash");
  const GrayImage s = resize_area(img, 8, 8);
  const double mean = s.mean();
  std::uint64_t bits = 0;
  for (Index r = 0; r < 8; ++r)
    for (Index c = 0; c < 8; ++c) bits = (bits << 1) | (s(r, c) > mean ? 1u : 0u);
  return {bits, HashAlgo::AHash};
}

HashDigest dhash(const GrayImage& img) {
  if (img.rows() < 9 || img.cols() < 9) throw ArgumentError("hashes need at least 9x9 pixels");
  check_gray(img, "dhash");
  const GrayImage s = resize_area(img, 8, 9);
  std::uint64_t bits = 0;
  for (Index r = 0; r < 8; ++r)
    for (Index c = 0; c < 8; ++c) bits = (bits << 1) | (s(r, c) > s(r, c + 1) ? 1u : 0u);
  return {bits, HashAlgo::DHash};
}

int hamming_distance(const HashDigest& a, const HashDigest& b) {
  if (a.algo != b.algo) throw ArgumentError("cannot compare " + to_string(a.algo) + " with " + to_string(b.algo));
  return std::popcount(a.bits ^ b.bits);
}

double hash_similarity(const HashDigest& a, const HashDigest& b) {
  return 1.0 - static_cast<double>(hamming_distance(a, b)) / 64.0;
}

GrayImage minmax_normalize(const GrayImage& img) {
  if (img.size() == 0) return img;
  const double lo = img.minCoeff(), hi = img.maxCoeff();
  if (!(hi > lo)) return GrayImage::Zero(img.rows(), img.cols());
  return (img.array() - lo) / (hi - lo);
}

GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  const auto r = static_cast<Index>(std::ceil(3 * sigma));
  return filter_clamped(img, gaussian_kernel(2 * r + 1, sigma));
}

GrayImage SpectralResidualSaliency::compute(const Tensor<double>& unit) const {
  const GrayImage gray = decolorize(unit);
  check_gray(gray, "saliency");
  const Index h = gray.rows(), w = gray.cols();
  if (gray.maxCoeff() - gray.minCoeff() < 1e-12) return GrayImage::Zero(h, w);

  const Index n = kWorkingSize;
  const GrayImage small = resize_for_comparison(gray, n, n);
  const ComplexMatrix spectrum = fft2(small.cast<std::complex<double>>(), false);
  GrayImage log_amp(n, n), phase(n, n);
  for (Index i = 0; i < spectrum.size(); ++i) {
    log_amp.data()[i] = std::log(std::abs(spectrum.data()[i]) + 1e-12);
    phase.data()[i] = std::arg(spectrum.data()[i]);
  }
  const GrayImage residual = log_amp - filter_clamped(log_amp, Eigen::VectorXd::Constant(3, 1.0 / 3.0));
  ComplexMatrix rebuilt(n, n);
  for (Index i = 0; i < rebuilt.size(); ++i)
    rebuilt.data()[i] = std::polar(std::exp(residual.data()[i]), phase.data()[i]);
  const ComplexMatrix back = fft2(rebuilt, true);
  GrayImage energy(n, n);
  for (Index i = 0; i < energy.size(); ++i) energy.data()[i] = std::norm(back.data()[i]);
  const GrayImage smooth = minmax_normalize(gaussian_blur(energy, kBlurSigma));
  return minmax_normalize(resize_for_comparison(smooth, h, w));
}

void register_saliency_backend(const std::string& name, SaliencyFactory factory) {
  std::lock_guard lock(registry_mutex());
  registry()[name] = std::move(factory);
}

std::vector<std::string> saliency_backends() {
  std::lock_guard lock(registry_mutex());
  std::vector<std::string> out;
  for (const auto& [k, v] : registry()) out.push_back(k);
  return out;
}

std::unique_ptr<SaliencyBackend> make_saliency_backend(const std::string& name) {
  std::lock_guard lock(registry_mutex());
  auto it = registry().find(name);
  if (it == registry().end()) throw ConfigError("unknown saliency backend '" + name + "'");
  return it->second();
}

GrayImage saliency(const Tensor<double>& unit, const std::string& backend) {
  return make_saliency_backend(backend)->compute(unit);
}

}  // namespace depthstyle

#include "depthstyle/image_io.hpp"

#include <algorithm>
#include <cctype>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace depthstyle {

namespace {

double depth_scale(int depth) {
  switch (depth) {
    case CV_8U: return 1.0 / 255.0;
    case CV_16U: return 1.0 / 65535.0;
    case CV_32F: case CV_64F: return 1.0;
    default: throw FormatError("unsupported pixel depth");
  }
}

}  // namespace

Tensor<float> read_image(const std::filesystem::path& path, ColorMode mode) {
  if (!std::filesystem::is_regular_file(path)) throw FormatError("no such image file: " + path.string());
  const int flags = (mode == ColorMode::Rgb ? cv::IMREAD_COLOR : cv::IMREAD_GRAYSCALE) | cv::IMREAD_ANYDEPTH;
  cv::Mat m;
  try {
    m = cv::imread(path.string(), flags);
  } catch (const cv::Exception& e) {
    throw FormatError("cannot decode " + path.string() + ": " + e.what());
  }
  if (m.empty()) throw FormatError("cannot decode " + path.string());
  const double s = depth_scale(m.depth());
  cv::Mat f;
  m.convertTo(f, CV_32F, s);
  const Index c = f.channels(), h = f.rows, w = f.cols;
  Tensor<float> out(1, c, h, w);
  for (Index y = 0; y < h; ++y) {
    const float* row = f.ptr<float>(static_cast<int>(y));
    for (Index x = 0; x < w; ++x)
      for (Index k = 0; k < c; ++k) {
        // OpenCV stores BGR; flip to RGB.
        const Index dst = c == 3 ? 2 - k : k;
        out(0, dst, y, x) = std::clamp(row[x * c + k], 0.0f, 1.0f);
      }
  }
  return out;
}

void write_image(const std::filesystem::path& path, const Tensor<float>& unit) {
  if (unit.batch() < 1 || (unit.channels() != 1 && unit.channels() != 3))
    throw ArgumentError("write_image needs a (1|N, 1|3, H, W) tensor, got " + shape_string(unit));
  const int c = static_cast<int>(unit.channels()), h = static_cast<int>(unit.height()), w = static_cast<int>(unit.width());
  cv::Mat m(h, w, c == 3 ? CV_8UC3 : CV_8UC1);
  for (int y = 0; y < h; ++y) {
    auto* row = m.ptr<unsigned char>(y);
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k) {
        const int src = c == 3 ? 2 - k : k;
        const float v = std::clamp(unit(0, src, y, x), 0.0f, 1.0f);
        row[x * c + k] = static_cast<unsigned char>(std::lround(v * 255.0f));
      }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m);
  } catch (const cv::Exception& e) {
    throw FormatError("cannot encode " + path.string() + ": " + e.what());
  }
  if (!ok) throw FormatError("cannot write " + path.string());
}

void write_gray16(const std::filesystem::path& path, const RowMatrix<double>& plane) {
  const double lo = plane.size() ? plane.minCoeff() : 0.0, hi = plane.size() ? plane.maxCoeff() : 0.0;
  cv::Mat m(static_cast<int>(plane.rows()), static_cast<int>(plane.cols()), CV_16UC1);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) {
      const double v = hi > lo ? (plane(y, x) - lo) / (hi - lo) : 0.0;
      m.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), m)) throw FormatError("cannot write " + path.string());
}

RowMatrix<double> read_gray(const std::filesystem::path& path) {
  const Tensor<float> t = read_image(path, ColorMode::Gray);
  return t.plane(0, 0).cast<double>();
}

bool has_image_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  static const char* known[] = {".png", ".jpg", ".jpeg", ".bmp", ".ppm", ".pgm", ".tif", ".tiff", ".webp"};
  return std::any_of(std::begin(known), std::end(known), [&](const char* k) { return ext == k; });
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ArgumentError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && has_image_extension(e.path())) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace depthstyle

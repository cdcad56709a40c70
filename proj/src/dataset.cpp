#include "depthstyle/dataset.hpp"

#include <numeric>

#include "depthstyle/image_io.hpp"
#include "depthstyle/resample.hpp"
#include "depthstyle/rng.hpp"

namespace depthstyle {

namespace {

Tensor<float> resize_planes(const Tensor<float>& unit, Index h, Index w) {
  const auto wy = comparison_weights(unit.height(), h), wx = comparison_weights(unit.width(), w);
  Tensor<float> out(1, unit.channels(), h, w);
  for (Index c = 0; c < unit.channels(); ++c) {
    const RowMatrix<double> p = unit.plane(0, c).cast<double>();
    out.plane(0, c) = (wy * p * wx.transpose()).cwiseMax(0.0).cwiseMin(1.0).cast<float>();
  }
  return out;
}

}  // namespace

Tensor<float> resize_short_side(const Tensor<float>& unit, Index size) {
  if (size < 1) throw ArgumentError("resize size must be positive");
  const Index h = unit.height(), w = unit.width();
  if (h < 1 || w < 1) throw ArgumentError("cannot resize an empty image");
  const double s = static_cast<double>(size) / static_cast<double>(std::min(h, w));
  const Index nh = h <= w ? size : std::max<Index>(size, std::lround(static_cast<double>(h) * s));
  const Index nw = w <= h ? size : std::max<Index>(size, std::lround(static_cast<double>(w) * s));
  if (nh == h && nw == w) return unit;
  return resize_planes(unit, nh, nw);
}

Tensor<float> resize_and_center_crop(const Tensor<float>& unit, Index size) {
  const Tensor<float> r = resize_short_side(unit, size);
  const Index top = (r.height() - size) / 2, left = (r.width() - size) / 2;
  Tensor<float> out(1, r.channels(), size, size);
  for (Index c = 0; c < r.channels(); ++c) out.plane(0, c) = r.plane(0, c).block(top, left, size, size);
  return out;
}

Dataset::Dataset(const std::filesystem::path& root, Index image_size, std::uint64_t seed, Warn warn)
    : files_(list_images(root)), image_size_(image_size), seed_(seed), warn_(std::move(warn)) {
  if (files_.empty()) throw ArgumentError("dataset " + root.string() + " contains no image files");
  if (image_size < 1) throw ArgumentError("image_size must be positive");
}

std::vector<std::size_t> Dataset::order(std::int64_t epoch) const {
  std::vector<std::size_t> idx(files_.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(seed_, static_cast<std::uint64_t>(epoch)));
  rng.shuffle(idx);
  return idx;
}

void Dataset::restore(const DatasetCursor& c, const std::set<std::string>& bad) {
  cursor_ = c;
  bad_ = bad;
  order_epoch_ = -1;
}

Tensor<float> Dataset::next_batch(Index batch_size) {
  if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
  std::vector<Tensor<float>> items;
  std::int64_t scanned_without_success = 0;
  while (static_cast<Index>(items.size()) < batch_size) {
    if (order_epoch_ != cursor_.epoch) {
      order_ = order(cursor_.epoch);
      order_epoch_ = cursor_.epoch;
    }
    if (cursor_.position >= static_cast<std::int64_t>(order_.size())) {
      ++cursor_.epoch;
      cursor_.position = 0;
      continue;
    }
    const auto& path = files_[order_[static_cast<std::size_t>(cursor_.position++)]];
    const std::string key = path.filename().string();
    if (bad_.count(key)) {
      if (++scanned_without_success > static_cast<std::int64_t>(files_.size()))
        throw ArgumentError("dataset has no decodable images");
      continue;
    }
    try {
      items.push_back(resize_and_center_crop(read_image(path), image_size_));
      scanned_without_success = 0;
    } catch (const FormatError& e) {
      bad_.insert(key);
      if (warn_) warn_("skipping " + path.string() + ": " + e.what());
      if (bad_.size() == files_.size()) throw ArgumentError("dataset has no decodable images");
    }
  }
  return concat_batch<float>(items);
}

}  // namespace depthstyle

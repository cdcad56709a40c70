#pragma once

// Deterministic image-directory loader. Each epoch visits every file once in an order
// drawn from (seed, epoch). Images are resized so the short side equals image_size
// and then center-cropped to image_size x image_size.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "depthstyle/tensor.hpp"

namespace depthstyle {

/// Short-side resize to `size` (area when shrinking, bicubic when growing) and center crop.
Tensor<float> resize_and_center_crop(const Tensor<float>& unit, Index size);

/// Short-side resize to `size`, aspect ratio kept.
Tensor<float> resize_short_side(const Tensor<float>& unit, Index size);

struct DatasetCursor {
  std::int64_t epoch = 0;
  std::int64_t position = 0;
  friend bool operator==(const DatasetCursor&, const DatasetCursor&) = default;
};

class Dataset {
 public:
  using Warn = std::function<void(const std::string&)>;

  /// Throws ArgumentError when `root` is not a directory or holds no image files.
  Dataset(const std::filesystem::path& root, Index image_size, std::uint64_t seed, Warn warn = {});

  /// Next `batch_size` decodable images as a (B,3,S,S) unit tensor. Undecodable files are
  /// skipped, warned about once and excluded from later epochs.
  Tensor<float> next_batch(Index batch_size);

  std::size_t size() const { return files_.size(); }
  std::size_t usable() const { return files_.size() - bad_.size(); }
  std::size_t skipped() const { return bad_.size(); }
  const std::set<std::string>& bad_files() const { return bad_; }
  const std::vector<std::filesystem::path>& files() const { return files_; }

  DatasetCursor cursor() const { return cursor_; }
  /// Restores a position and the set of known-bad files (by file name).
  void restore(const DatasetCursor& c, const std::set<std::string>& bad);

 private:
  // Files in visiting order for `epoch`.
  std::vector<std::size_t> order(std::int64_t epoch) const;

  std::vector<std::filesystem::path> files_;
  Index image_size_;
  std::uint64_t seed_;
  Warn warn_;
  DatasetCursor cursor_;
  std::vector<std::size_t> order_;
  std::int64_t order_epoch_ = -1;
  std::set<std::string> bad_;
};

}  // namespace depthstyle

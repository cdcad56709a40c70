#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>

#include "depthstyle/errors.hpp"

namespace depthstyle {

using Index = Eigen::Index;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Dense 4-D array in (batch, channels, height, width) order, width fastest.
template <typename Scalar>
class Tensor {
 public:
  using Shape = std::array<Index, 4>;
  using PlaneMap = Eigen::Map<RowMatrix<Scalar>>;
  using ConstPlaneMap = Eigen::Map<const RowMatrix<Scalar>>;

  Tensor() : shape_{0, 0, 0, 0} {}
  Tensor(Index n, Index c, Index h, Index w) : shape_{n, c, h, w}, data_(Vector<Scalar>::Zero(n * c * h * w)) {
    if (n < 0 || c < 0 || h < 0 || w < 0) throw ArgumentError("negative tensor dimension");
  }
  explicit Tensor(const Shape& s) : Tensor(s[0], s[1], s[2], s[3]) {}

  static Tensor constant(Index n, Index c, Index h, Index w, Scalar v) {
    Tensor t(n, c, h, w);
    t.data_.setConstant(v);
    return t;
  }
  static Tensor scalar(Scalar v) { return constant(1, 1, 1, 1, v); }

  const Shape& shape() const { return shape_; }
  Index batch() const { return shape_[0]; }
  Index channels() const { return shape_[1]; }
  Index height() const { return shape_[2]; }
  Index width() const { return shape_[3]; }
  Index plane_size() const { return shape_[2] * shape_[3]; }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  Vector<Scalar>& flat() { return data_; }
  const Vector<Scalar>& flat() const { return data_; }

  Scalar& operator()(Index n, Index c, Index y, Index x) { return data_[offset(n, c, y, x)]; }
  Scalar operator()(Index n, Index c, Index y, Index x) const { return data_[offset(n, c, y, x)]; }

  /// Value of a 1x1x1x1 tensor.
  Scalar item() const {
    if (data_.size() != 1) throw ArgumentError("item() on a non-scalar tensor");
    return data_[0];
  }

  /// (channels, height*width) view of one batch element.
  PlaneMap instance(Index n) { return PlaneMap(data() + n * instance_size(), shape_[1], plane_size()); }
  ConstPlaneMap instance(Index n) const {
    return ConstPlaneMap(data() + n * instance_size(), shape_[1], plane_size());
  }

  /// (height, width) view of one channel of one batch element.
  PlaneMap plane(Index n, Index c) { return PlaneMap(data() + (n * shape_[1] + c) * plane_size(), shape_[2], shape_[3]); }
  ConstPlaneMap plane(Index n, Index c) const {
    return ConstPlaneMap(data() + (n * shape_[1] + c) * plane_size(), shape_[2], shape_[3]);
  }

  Index instance_size() const { return shape_[1] * plane_size(); }

  /// Copy of batch elements [first, first + count).
  Tensor slice_batch(Index first, Index count) const {
    if (first < 0 || count < 0 || first + count > batch()) throw ArgumentError("batch slice out of range");
    Tensor out(count, shape_[1], shape_[2], shape_[3]);
    out.data_ = data_.segment(first * instance_size(), count * instance_size());
    return out;
  }

  bool all_finite() const { return data_.allFinite(); }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(shape_);
    out.flat() = data_.template cast<Other>();
    return out;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && std::memcmp(a.data(), b.data(), sizeof(Scalar) * a.size()) == 0;
  }

 private:
  Index offset(Index n, Index c, Index y, Index x) const {
    return ((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x;
  }

  Shape shape_;
  Vector<Scalar> data_;
};

template <typename Scalar>
std::string shape_string(const Tensor<Scalar>& t) {
  const auto& s = t.shape();
  return "(" + std::to_string(s[0]) + "," + std::to_string(s[1]) + "," + std::to_string(s[2]) + "," +
         std::to_string(s[3]) + ")";
}

/// Concatenate tensors along the batch axis.
template <typename Scalar, typename Range>
Tensor<Scalar> concat_batch(const Range& parts) {
  Index total = 0;
  const Tensor<Scalar>* first = nullptr;
  for (const auto& p : parts) {
    if (!first) first = &p;
    if (p.channels() != first->channels() || p.height() != first->height() || p.width() != first->width())
      throw ArgumentError("concat_batch: inconsistent shapes");
    total += p.batch();
  }
  if (!first) return {};
  Tensor<Scalar> out(total, first->channels(), first->height(), first->width());
  Index at = 0;
  for (const auto& p : parts) {
    out.flat().segment(at, p.size()) = p.flat();
    at += p.size();
  }
  return out;
}

/// 64-bit FNV-1a over the raw bytes of a tensor. Used to prove frozen weights stay untouched.
template <typename Scalar>
std::uint64_t fnv1a(const Tensor<Scalar>& t, std::uint64_t h = 1469598103934665603ULL) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
  for (std::size_t i = 0; i < sizeof(Scalar) * static_cast<std::size_t>(t.size()); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

enum class ValueRange { Unit, Byte };

inline double range_max(ValueRange r) { return r == ValueRange::Unit ? 1.0 : 255.0; }

/// Image batch with a declared value range.
template <typename Scalar>
struct ImageTensor {
  Tensor<Scalar> data;
  ValueRange range = ValueRange::Unit;

  Index batch() const { return data.batch(); }
  Index channels() const { return data.channels(); }
  Index height() const { return data.height(); }
  Index width() const { return data.width(); }

  /// Throws ArgumentError unless channels are 1 or 3 and all values are finite and in range.
  void validate(Index min_side = 1) const {
    if (data.channels() != 1 && data.channels() != 3)
      throw ArgumentError("image must have 1 or 3 channels, got " + std::to_string(data.channels()));
    if (data.height() < min_side || data.width() < min_side)
      throw ArgumentError("image must be at least " + std::to_string(min_side) + " pixels per side");
    if (!data.all_finite()) throw ArgumentError("image contains non-finite values");
    const Scalar hi = static_cast<Scalar>(range_max(range));
    if (data.size() > 0 && (data.flat().minCoeff() < Scalar(0) || data.flat().maxCoeff() > hi))
      throw ArgumentError("image values outside declared range");
  }

  /// Data rescaled to [0, 1].
  Tensor<Scalar> unit() const {
    if (range == ValueRange::Unit) return data;
    Tensor<Scalar> out = data;
    out.flat() /= Scalar(255);
    return out;
  }

  static ImageTensor from_unit(Tensor<Scalar> unit_data, ValueRange r) {
    if (r == ValueRange::Byte) unit_data.flat() *= Scalar(255);
    return {std::move(unit_data), r};
  }
};

}  // namespace depthstyle

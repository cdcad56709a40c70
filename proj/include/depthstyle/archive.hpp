#pragma once

// Single-file tensor archive shared by trained models, checkpoints and frozen
// backbone weights. Layout (all integers little-endian):
//
//   offset 0   8 bytes  magic "DSTYLARC"
//          8   u32      format version (kArchiveVersion)
//         12   u32      reserved, zero
//         16   u64      header length H
//         24   u64      payload length P
//         32   H bytes  UTF-8 JSON header
//       32+H   P bytes  tensor payload
//     32+H+P   u32      CRC-32 (zlib polynomial) of header and payload
//
// Header: {"kind": str, "meta": object,
//          "tensors": [{"name", "dtype": "f32"|"f64", "shape": [n,c,h,w],
//                       "offset", "bytes"}]}
// Offsets are relative to the payload start. Tensor data is row-major NCHW.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "depthstyle/params.hpp"

namespace depthstyle {

inline constexpr std::uint32_t kArchiveVersion = 1;

enum class Dtype { F32, F64 };

class Archive {
 public:
  struct Blob {
    Dtype dtype = Dtype::F32;
    typename Tensor<float>::Shape shape{};
    std::vector<unsigned char> bytes;
  };

  Archive() = default;
  explicit Archive(std::string kind) : kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }
  nlohmann::json& meta() { return meta_; }
  const nlohmann::json& meta() const { return meta_; }

  template <typename Scalar>
  void put(const std::string& name, const Tensor<Scalar>& t, Dtype dtype) {
    Blob b;
    b.dtype = dtype;
    b.shape = t.shape();
    if (dtype == Dtype::F32) {
      const Tensor<float> f = t.template cast<float>();
      b.bytes.assign(reinterpret_cast<const unsigned char*>(f.data()),
                     reinterpret_cast<const unsigned char*>(f.data() + f.size()));
    } else {
      const Tensor<double> d = t.template cast<double>();
      b.bytes.assign(reinterpret_cast<const unsigned char*>(d.data()),
                     reinterpret_cast<const unsigned char*>(d.data() + d.size()));
    }
    if (!blobs_.count(name)) order_.push_back(name);
    blobs_[name] = std::move(b);
  }

  template <typename Scalar>
  void put_params(const std::string& prefix, const ParamSet<Scalar>& params, Dtype dtype) {
    for (const auto& e : params) put(prefix + e.name, e.value, dtype);
  }

  bool contains(const std::string& name) const { return blobs_.count(name) != 0; }
  const std::vector<std::string>& names() const { return order_; }

  template <typename Scalar>
  Tensor<Scalar> get(const std::string& name) const {
    auto it = blobs_.find(name);
    if (it == blobs_.end()) throw FormatError("archive has no tensor named '" + name + "'");
    const Blob& b = it->second;
    if (b.dtype == Dtype::F32) {
      Tensor<float> f(b.shape);
      check_len(name, b, sizeof(float) * static_cast<std::size_t>(f.size()));
      std::memcpy(f.data(), b.bytes.data(), b.bytes.size());
      return f.template cast<Scalar>();
    }
    Tensor<double> d(b.shape);
    check_len(name, b, sizeof(double) * static_cast<std::size_t>(d.size()));
    std::memcpy(d.data(), b.bytes.data(), b.bytes.size());
    return d.template cast<Scalar>();
  }

  /// Fills every tensor of `params` from `prefix + name`, checking shapes.
  template <typename Scalar>
  void get_params(const std::string& prefix, ParamSet<Scalar>& params) const {
    for (auto& e : params) {
      Tensor<Scalar> t = get<Scalar>(prefix + e.name);
      if (!t.same_shape(e.value))
        throw FormatError("tensor '" + prefix + e.name + "' has shape " + shape_string(t) + ", expected " +
                          shape_string(e.value));
      e.value = std::move(t);
    }
  }

  /// Writes atomically: a temporary sibling file is renamed over `path`.
  void save(const std::filesystem::path& path) const;
  static Archive load(const std::filesystem::path& path);

 private:
  static void check_len(const std::string& name, const Blob& b, std::size_t expected) {
    if (b.bytes.size() != expected) throw IntegrityError("tensor '" + name + "' byte length mismatch");
  }

  std::string kind_;
  nlohmann::json meta_ = nlohmann::json::object();
  std::map<std::string, Blob> blobs_;
  std::vector<std::string> order_;
};

/// Lower-case hex SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);

/// Resolves an external weight asset: throws SetupError with fetch instructions
/// when the file is missing, IntegrityError when a non-empty checksum disagrees.
void verify_asset(const std::filesystem::path& path, const std::string& expected_sha256,
                  const std::string& source_hint);

}  // namespace depthstyle

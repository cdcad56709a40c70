#pragma once

// Single-image and directory stylisation with a trained net.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "depthstyle/transform_net.hpp"

namespace depthstyle {

/// Peak bytes of one eager forward pass on an h x w image (after padding), counting the
/// largest layer's input, output and im2col buffer plus the image itself.
std::size_t estimate_forward_bytes(const TransformNetConfig& config, Index h, Index w);

/// 75% of physical memory, or DEPTHSTYLE_MEMORY_BUDGET_MB when set.
std::size_t default_memory_budget();

/// forward() with a memory check. Throws ResourceError naming a --max-dim that fits.
ImageTensor<float> stylize(const TransformNet<float>& net, const ImageTensor<float>& image,
                           std::size_t budget_bytes = default_memory_budget());

/// Area-downscales so the longer side is at most `max_dim`; returns the input when it fits.
Tensor<float> limit_max_dim(const Tensor<float>& unit, Index max_dim);

struct StylizeRequest {
  std::filesystem::path model;
  std::filesystem::path input;
  std::filesystem::path output;
  std::string format = "png";
  Index max_dim = 0;
  std::size_t budget_bytes = default_memory_budget();
};

struct StylizeReport {
  struct Success {
    std::filesystem::path input, output;
  };
  struct Failure {
    std::filesystem::path input;
    std::string error;
  };
  std::size_t attempted = 0;
  std::vector<Success> successes;
  std::vector<Failure> failures;

  nlohmann::json to_json() const;
};

/// A file input writes one image: to `output` itself when it has an image extension,
/// otherwise to output/<stem>.<format>. A directory input mirrors every image file's
/// stem into the output directory. Per-file errors are collected in the report.
StylizeReport stylize_batch(const StylizeRequest& request, const std::function<void(const std::string&)>& warn = {});

}  // namespace depthstyle

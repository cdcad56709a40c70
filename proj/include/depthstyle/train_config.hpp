#pragma once

// Training configuration and its key = value text form. Keys are the field names below;
// lists are comma separated; '#' starts a comment.

#include <filesystem>
#include <string>
#include <vector>

#include "depthstyle/depth.hpp"
#include "depthstyle/perceptual.hpp"
#include "depthstyle/transform_net.hpp"

namespace depthstyle {

/// Stub scales that put the three weighted terms at the same order at initialisation
/// under the default weights, measured at 256x256.
inline constexpr double kStubFeatureGain = 4e-4;
inline constexpr double kStubDepthScale = 0.016;

struct TrainConfig {
  std::string style_image_path;
  std::string dataset_root;
  std::string output_dir = "run";

  Index image_size = 256;
  Index batch_size = 4;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  double content_weight = 1e5;
  double style_weight = 1e10;
  double depth_weight = 1e3;

  /// Optimisation length: `iterations` when > 0, otherwise epochs over the dataset.
  Index epochs = 2;
  Index iterations = 0;
  std::uint64_t seed = 1;
  Index checkpoint_interval = 1000;

  std::string content_layer = "relu2_2";
  std::vector<std::string> style_layers{"relu1_2", "relu2_2", "relu3_3", "relu4_3"};

  TransformNetConfig net{};

  BackboneSpec backbone = default_backbone();
  DepthSpec depth = default_depth();
  bool depth_minmax = false;

  static BackboneSpec default_backbone() {
    BackboneSpec b;
    b.stub_gain = kStubFeatureGain;
    return b;
  }
  static DepthSpec default_depth() {
    DepthSpec d;
    d.stub_config.output_scale = kStubDepthScale;
    return d;
  }

  /// Throws ConfigError on the first violated constraint.
  void validate() const;
  /// Total optimisation steps given a dataset of `images` usable files.
  Index total_iterations(Index images) const;

  std::string to_text() const;
  static TrainConfig parse(const std::string& text);
  static TrainConfig load(const std::filesystem::path& path);

  /// Applies one key = value assignment.
  void set(const std::string& key, const std::string& value);
};

}  // namespace depthstyle

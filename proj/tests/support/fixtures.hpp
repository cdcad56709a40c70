#pragma once

// Tiny training setups that run in seconds.

#include <filesystem>

#include "depthstyle/image_io.hpp"
#include "depthstyle/synthetic.hpp"
#include "depthstyle/train_config.hpp"

namespace depthstyle::testing {

inline TransformNetConfig tiny_net() {
  TransformNetConfig c;
  c.downsample_channels = {4, 8, 16};
  c.num_residual_blocks = 1;
  return c;
}

/// Writes `images` scenes and a style pattern under `root` and returns a 64x64 config
/// with a tiny net and depth stand-in.
inline TrainConfig tiny_config(const std::filesystem::path& root, int images = 10, std::uint64_t seed = 7) {
  const auto data = root / "data";
  std::filesystem::create_directories(data);
  synth::write_scene_set(data, images, 64, 96, seed);
  write_image(root / "style.png", synth::style_pattern(80, 96, seed + 1));
  TrainConfig c;
  c.style_image_path = (root / "style.png").string();
  c.dataset_root = data.string();
  c.output_dir = (root / "run").string();
  c.image_size = 64;
  c.batch_size = 2;
  c.iterations = 10;
  c.checkpoint_interval = 0;
  c.seed = seed;
  c.net = tiny_net();
  c.depth.stub_config.native_size = 32;
  c.depth.stub_config.widths = {4, 8};
  c.depth.stub_config.output_scale = 0.005;
  return c;
}

}  // namespace depthstyle::testing

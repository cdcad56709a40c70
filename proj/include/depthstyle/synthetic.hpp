#pragma once

// Procedural fixtures: outdoor-like scenes with a horizon, a receding textured ground
// plane and shaded foreground objects, plus a high-frequency style pattern.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "depthstyle/tensor.hpp"

namespace depthstyle::synth {

/// A (1,3,h,w) unit-range scene.
Tensor<float> scene(Index h, Index w, std::uint64_t seed);

/// A (1,3,h,w) unit-range painting-like pattern of overlapping coloured waves and strokes.
Tensor<float> style_pattern(Index h, Index w, std::uint64_t seed);

/// Writes `count` scenes as PNG files named scene_00000.png, ... with sides drawn from
/// [min_side, max_side] so aspect ratios vary. Returns the written paths.
std::vector<std::filesystem::path> write_scene_set(const std::filesystem::path& dir, int count, Index min_side,
                                                   Index max_side, std::uint64_t seed);

}  // namespace depthstyle::synth

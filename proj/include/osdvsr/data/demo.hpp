// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "osdvsr/core/types.hpp"

namespace osdvsr::data {

enum class DemoKind { kStatic, kShift, kRotate };

DemoKind parse_demo_kind(const std::string& name);
std::string to_string(DemoKind kind);

struct DemoSpec {
  DemoKind kind = DemoKind::kShift;
  int frames = 5;
  int height = 64;
  int width = 64;
  int channels = 3;
  std::uint64_t seed = 0;
  /// Pixels per frame for kShift (integer so the ground-truth motion is exact).
  int shift_x = 2;
  int shift_y = 0;
  /// Degrees per frame about the image centre for kRotate.
  double rotate_deg = 2.0;
};

/// Smooth two-octave value noise in [0, 1], defined on continuous
/// coordinates so translated frames are exact resamplings of one texture.
double value_noise(double x, double y, int channel, std::uint64_t seed);

/// Frame t samples the texture at (x - t * shift_x, y - t * shift_y) for
/// kShift and at the inverse-rotated position for kRotate.
VideoClip make_demo_clip(const DemoSpec& spec);

/// n clips with varied seeds and integer shift velocities, for training.
std::vector<VideoClip> make_demo_set(int count, int frames, int size, std::uint64_t seed);

}  // namespace osdvsr::data

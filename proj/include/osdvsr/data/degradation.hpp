// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "osdvsr/core/geometry.hpp"
#include "osdvsr/core/types.hpp"

namespace osdvsr::data {

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  [[nodiscard]] double sample(std::mt19937_64& rng) const;
  [[nodiscard]] bool valid() const { return lo <= hi; }
};

/// One blur -> resize -> noise -> compression pass. Sigmas are in pixels
/// (blur) and in [0, 1] intensity units (noise); scale is relative to the
/// pass input; quality follows the IJG 1..100 convention.
struct DegradationPass {
  bool blur = true;
  Range blur_sigma{0.2, 3.0};
  Range scale{0.15, 1.5};
  bool noise = true;
  Range noise_sigma{1.0 / 255.0, 30.0 / 255.0};
  bool compress = true;
  Range quality{30.0, 95.0};
};

struct DegradationConfig {
  DegradationPass first;
  DegradationPass second{true, {0.2, 1.5}, {0.3, 1.2}, true, {1.0 / 255.0, 25.0 / 255.0}, true, {30.0, 95.0}};
  bool second_pass = true;
  /// Candidate resampling kernels; one is drawn per resize.
  std::vector<Interpolation> interpolations{Interpolation::kArea, Interpolation::kBilinear, Interpolation::kBicubic};
  std::uint64_t seed = 0;

  /// No blur, exact x1/4 area resize, no noise, no compression.
  static DegradationConfig identity();
  void validate() const;
};

/// Parameters drawn once per clip so every frame is degraded the same way.
struct PassParams {
  double blur_sigma = 0.0;
  double scale = 1.0;
  Interpolation interp = Interpolation::kArea;
  double noise_sigma = 0.0;
  int quality = 100;
};

struct DegradationParams {
  std::vector<PassParams> passes;
  Interpolation final_interp = Interpolation::kArea;
};

DegradationParams sample_degradation(const DegradationConfig& cfg, std::uint64_t clip_index);

/// Sum-normalized discrete gaussian, radius ceil(3 sigma). sigma <= 0 gives
/// the delta kernel {1}.
std::vector<double> gaussian_kernel(double sigma);
/// Separable blur with reflect borders.
Grid gaussian_blur(const Grid& image, double sigma);

/// IJG luminance table scaled to `quality` (1..100), row-major 8x8.
std::array<int, 64> quantization_table(int quality);
/// Per-channel 8x8 block DCT quantization on 8-bit levels. Edges are
/// replicated up to a multiple of 8 and cropped back.
Grid block_dct_compress(const Grid& image, int quality);

/// HR dims must be divisible by 4; output is exactly HR / 4. Noise
/// realizations are drawn per frame from (seed, clip_index, frame index).
VideoClip degrade_clip(const VideoClip& hr, const DegradationConfig& cfg, std::uint64_t clip_index = 0);

/// Deterministic generator keyed by any number of integers.
std::mt19937_64 keyed_rng(std::initializer_list<std::uint64_t> keys);

}  // namespace osdvsr::data

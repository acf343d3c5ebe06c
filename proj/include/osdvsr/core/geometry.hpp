// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "osdvsr/core/types.hpp"

namespace osdvsr {

/// Bilinear backward warp: output(x, y) samples the input at
/// (x + dx, y + dy). Sample coordinates are clamped to the image, so
/// out-of-bounds lookups replicate the border.
Grid warp(const Grid& image, const FlowField& flow);
Frame warp(const Frame& frame, const FlowField& flow);

enum class ResampleDirection { kUp, kDown };

/// Up: nearest-neighbour replication. Down: area mean over factor x factor
/// blocks (reflect-padded to a multiple of factor), re-binarized at 0.5 when
/// the input is a hard mask.
PixelMask resample_mask(const PixelMask& mask, int factor, ResampleDirection direction);

enum class Interpolation { kArea, kBilinear, kBicubic };

/// Resize to an explicit output size. Bilinear and bicubic use half-pixel
/// centres with edge clamping; area integrates exact pixel overlaps.
Grid resize(const Grid& image, int out_height, int out_width, Interpolation interp);

/// Integer-factor area mean (exact block average).
Grid area_downsample(const Grid& image, int factor);

Grid upsample_nearest(const Grid& image, int factor);

/// Reflect-pads the bottom/right edges so both dimensions become multiples of
/// `multiple`. Returns the input unchanged when already aligned.
Grid pad_reflect_to_multiple(const Grid& image, int multiple);

Grid crop(const Grid& image, int top, int left, int height, int width);

/// Peak signal-to-noise ratio with MAX = 1. Identical inputs return 100 dB.
double psnr(const Frame& a, const Frame& b);
double psnr(const Grid& a, const Grid& b);

inline constexpr double kPsnrCapDb = 100.0;

double mean_squared_error(const Grid& a, const Grid& b);

}  // namespace osdvsr

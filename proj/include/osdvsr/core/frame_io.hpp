// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "osdvsr/core/types.hpp"

namespace osdvsr::io {

/// Reads an 8- or 16-bit grayscale/RGB PNG (alpha is dropped) and normalizes
/// samples to [0, 1] by dividing by 255 or 65535.
Frame read_png(const std::filesystem::path& path, int frame_index = 0);

/// Writes a frame as PNG with the given bit depth (8 or 16). Values are
/// quantized with round-to-nearest.
void write_png(const std::filesystem::path& path, const Frame& frame, int bit_depth = 8);
void write_png(const std::filesystem::path& path, const Grid& image, int bit_depth = 8);

/// File name used for frame `index` (0-based) inside a clip directory:
/// frame_000001.png for index 0.
std::string frame_file_name(int index);

/// Loads every frame_NNNNNN.png in `dir` in numeric order.
VideoClip read_clip_dir(const std::filesystem::path& dir, ScaleTag tag);
void write_clip_dir(const std::filesystem::path& dir, const VideoClip& clip, int bit_depth = 8);

}  // namespace osdvsr::io

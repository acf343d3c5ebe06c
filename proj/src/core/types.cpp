// SPDX-License-Identifier: Apache-2.0

#include "osdvsr/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace osdvsr {

Grid::Grid(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
  require(channels >= 0 && height >= 0 && width >= 0, "Grid: negative dimension");
  data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

Grid::Grid(int channels, int height, int width, std::vector<double> data)
    : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
  require(channels >= 0 && height >= 0 && width >= 0, "Grid: negative dimension");
  require(data_.size() == static_cast<std::size_t>(channels) * height * width,
          "Grid: data size does not match dimensions");
}

bool Grid::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Frame::Frame(Grid pixels, int frame_index) : pixels_(std::move(pixels)), index_(frame_index) {
  require(frame_index >= 0, "Frame: negative frame index");
  require(pixels_.channels() == 1 || pixels_.channels() == 3, "Frame: channel count must be 1 or 3");
  require(pixels_.height() > 0 && pixels_.width() > 0, "Frame: empty frame");
  for (double v : pixels_.data()) {
    if (!(std::isfinite(v) && v >= 0.0 && v <= 1.0)) {
      detail::contract_fail("Frame: pixel value outside [0,1] or non-finite: " + std::to_string(v));
    }
  }
}

Frame clamp_to_frame(Grid pixels, int frame_index) {
  for (double& v : pixels.data()) {
    require(std::isfinite(v), "clamp_to_frame: non-finite pixel");
    v = std::clamp(v, 0.0, 1.0);
  }
  return Frame(std::move(pixels), frame_index);
}

VideoClip::VideoClip(std::vector<Frame> frames, ScaleTag tag) : frames_(std::move(frames)), tag_(tag) {
  require(!frames_.empty(), "VideoClip: at least one frame required");
  const Frame& first = frames_.front();
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    const Frame& f = frames_[i];
    require(f.pixels().same_shape(first.pixels()), "VideoClip: frames differ in shape");
    require(f.index() == first.index() + static_cast<int>(i), "VideoClip: frame indices not consecutive");
  }
}

LatentGrid::LatentGrid(Grid values, int source_frame_index)
    : values_(std::move(values)), source_(source_frame_index) {
  require(values_.all_finite(), "LatentGrid: non-finite value");
}

FlowField::FlowField(int height, int width, FlowDirection direction)
    : vectors_(2, height, width, 0.0), direction_(direction) {}

FlowField::FlowField(Grid vectors, FlowDirection direction)
    : vectors_(std::move(vectors)), direction_(direction) {
  require(vectors_.channels() == 2, "FlowField: expects 2 channels (dx, dy)");
  require(vectors_.all_finite(), "FlowField: non-finite displacement");
}

PixelMask::PixelMask(int height, int width, double fill, MaskKind kind)
    : PixelMask(height, width, std::vector<double>(static_cast<std::size_t>(height) * width, fill), kind) {}

PixelMask::PixelMask(int height, int width, std::vector<double> values, MaskKind kind)
    : height_(height), width_(width), values_(std::move(values)), kind_(kind) {
  require(height >= 0 && width >= 0, "PixelMask: negative dimension");
  require(values_.size() == static_cast<std::size_t>(height) * width, "PixelMask: size mismatch");
  for (double v : values_) {
    if (kind == MaskKind::kHard) {
      require(v == 0.0 || v == 1.0, "PixelMask: hard mask value not in {0,1}");
    } else {
      require(std::isfinite(v) && v >= 0.0 && v <= 1.0, "PixelMask: soft mask value outside [0,1]");
    }
  }
}

double PixelMask::mean() const {
  if (values_.empty()) return 0.0;
  return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
}

std::uint64_t fnv1a(std::span<const std::byte> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (std::byte b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t hash_values(std::span<const double> values, std::uint64_t seed) {
  return fnv1a(std::as_bytes(values), seed);
}

}  // namespace osdvsr

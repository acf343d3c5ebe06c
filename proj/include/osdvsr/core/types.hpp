// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "osdvsr/core/errors.hpp"

namespace osdvsr {

/// Dense channel-major (C, H, W) array of doubles. Every image-like value in
/// the library (frames, latents, flow fields) is stored this way.
class Grid {
 public:
  Grid() = default;
  Grid(int channels, int height, int width, double fill = 0.0);
  Grid(int channels, int height, int width, std::vector<double> data);

  [[nodiscard]] int channels() const { return channels_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] std::size_t plane_size() const {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }

  [[nodiscard]] double& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  [[nodiscard]] double at(int c, int y, int x) const { return data_[index(c, y, x)]; }

  [[nodiscard]] std::span<double> data() { return data_; }
  [[nodiscard]] std::span<const double> data() const { return data_; }
  [[nodiscard]] const std::vector<double>& vec() const { return data_; }
  [[nodiscard]] std::vector<double>& vec() { return data_; }

  [[nodiscard]] bool same_shape(const Grid& other) const {
    return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
  }
  [[nodiscard]] bool all_finite() const;

  bool operator==(const Grid& other) const = default;

 private:
  [[nodiscard]] std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

/// One video frame. Pixels are finite and lie in [0, 1]; C is 1 or 3.
class Frame {
 public:
  Frame() = default;
  Frame(Grid pixels, int frame_index = 0);

  [[nodiscard]] const Grid& pixels() const { return pixels_; }
  [[nodiscard]] int index() const { return index_; }
  [[nodiscard]] int channels() const { return pixels_.channels(); }
  [[nodiscard]] int height() const { return pixels_.height(); }
  [[nodiscard]] int width() const { return pixels_.width(); }

  [[nodiscard]] Frame with_index(int frame_index) const { return Frame(pixels_, frame_index); }

  bool operator==(const Frame& other) const = default;

 private:
  Grid pixels_;
  int index_ = 0;
};

/// Builds a Frame after clamping every value into [0, 1]. Use when the data
/// comes from arithmetic that may overshoot slightly (noise, interpolation).
Frame clamp_to_frame(Grid pixels, int frame_index = 0);

enum class ScaleTag { kHighRes, kLowRes };

class VideoClip {
 public:
  VideoClip() = default;
  VideoClip(std::vector<Frame> frames, ScaleTag tag);

  [[nodiscard]] const std::vector<Frame>& frames() const { return frames_; }
  [[nodiscard]] const Frame& operator[](std::size_t i) const { return frames_[i]; }
  [[nodiscard]] std::size_t size() const { return frames_.size(); }
  [[nodiscard]] ScaleTag scale_tag() const { return tag_; }
  [[nodiscard]] int height() const { return frames_.front().height(); }
  [[nodiscard]] int width() const { return frames_.front().width(); }
  [[nodiscard]] int channels() const { return frames_.front().channels(); }

 private:
  std::vector<Frame> frames_;
  ScaleTag tag_ = ScaleTag::kHighRes;
};

/// A per-frame latent grid (d, h, w).
class LatentGrid {
 public:
  LatentGrid() = default;
  LatentGrid(Grid values, int source_frame_index = 0);

  [[nodiscard]] const Grid& values() const { return values_; }
  [[nodiscard]] int source_frame_index() const { return source_; }
  [[nodiscard]] int channels() const { return values_.channels(); }
  [[nodiscard]] int height() const { return values_.height(); }
  [[nodiscard]] int width() const { return values_.width(); }

  bool operator==(const LatentGrid& other) const = default;

 private:
  Grid values_;
  int source_ = 0;
};

enum class FlowDirection { kBackward, kForward };

/// Per-pixel displacement (dx, dy) stored as a 2-channel grid.
class FlowField {
 public:
  FlowField() = default;
  FlowField(int height, int width, FlowDirection direction = FlowDirection::kBackward);
  FlowField(Grid vectors, FlowDirection direction = FlowDirection::kBackward);

  [[nodiscard]] const Grid& vectors() const { return vectors_; }
  [[nodiscard]] Grid& vectors() { return vectors_; }
  [[nodiscard]] double dx(int y, int x) const { return vectors_.at(0, y, x); }
  [[nodiscard]] double dy(int y, int x) const { return vectors_.at(1, y, x); }
  [[nodiscard]] int height() const { return vectors_.height(); }
  [[nodiscard]] int width() const { return vectors_.width(); }
  [[nodiscard]] FlowDirection direction() const { return direction_; }

  bool operator==(const FlowField& other) const = default;

 private:
  Grid vectors_;
  FlowDirection direction_ = FlowDirection::kBackward;
};

enum class MaskKind { kSoft, kHard };

/// Single-plane mask. Hard masks hold only {0, 1}; soft masks lie in [0, 1].
class PixelMask {
 public:
  PixelMask() = default;
  PixelMask(int height, int width, double fill, MaskKind kind);
  PixelMask(int height, int width, std::vector<double> values, MaskKind kind);

  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] MaskKind kind() const { return kind_; }
  [[nodiscard]] bool is_hard() const { return kind_ == MaskKind::kHard; }
  [[nodiscard]] double at(int y, int x) const {
    return values_[static_cast<std::size_t>(y) * width_ + x];
  }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] double mean() const;

  bool operator==(const PixelMask& other) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
  MaskKind kind_ = MaskKind::kSoft;
};

/// FNV-1a over raw bytes; used for content keys and parameter fingerprints.
std::uint64_t fnv1a(std::span<const std::byte> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t hash_values(std::span<const double> values, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace osdvsr

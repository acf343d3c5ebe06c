// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "osdvsr/core/types.hpp"
#include "osdvsr/data/degradation.hpp"

namespace osdvsr::data {

struct DatasetOptions {
  int clip_length = 5;
  /// Square HR crop; must be divisible by 4.
  int crop = 64;
  /// Frame step between consecutive windows of one source clip.
  int stride = 1;
  DegradationConfig degradation;
  std::uint64_t seed = 0;
};

struct Sample {
  VideoClip hr;
  VideoClip lr;
  std::uint64_t index = 0;
};

/// Windows of clip_length frames over every source clip, each randomly
/// cropped and degraded. All randomness for sample k derives from
/// (seed, k), so get() is reentrant and order-independent.
class ClipDataset {
 public:
  /// root/<clip_name>/frame_%06d.png, clip directories in name order.
  static ClipDataset from_directory(const std::filesystem::path& root, DatasetOptions opts);
  static ClipDataset from_clips(std::vector<VideoClip> clips, DatasetOptions opts);

  [[nodiscard]] std::size_t size() const { return windows_.size(); }
  [[nodiscard]] Sample get(std::size_t k) const;
  [[nodiscard]] const DatasetOptions& options() const { return opts_; }

 private:
  ClipDataset(std::vector<VideoClip> clips, DatasetOptions opts);

  struct Window {
    std::size_t clip;
    std::size_t start;
  };
  std::vector<VideoClip> clips_;
  std::vector<Window> windows_;
  DatasetOptions opts_;
};

}  // namespace osdvsr::data

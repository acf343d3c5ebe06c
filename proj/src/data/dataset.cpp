// SPDX-License-Identifier: Apache-2.0

#include "osdvsr/data/dataset.hpp"

#include <algorithm>

#include "osdvsr/core/frame_io.hpp"
#include "osdvsr/core/geometry.hpp"

namespace osdvsr::data {

ClipDataset::ClipDataset(std::vector<VideoClip> clips, DatasetOptions opts)
    : clips_(std::move(clips)), opts_(std::move(opts)) {
  require(opts_.clip_length >= 1, "ClipDataset: clip_length must be >= 1");
  require(opts_.crop >= 16 && opts_.crop % 4 == 0, "ClipDataset: crop must be >= 16 and divisible by 4");
  require(opts_.stride >= 1, "ClipDataset: stride must be >= 1");
  opts_.degradation.validate();
  for (std::size_t c = 0; c < clips_.size(); ++c) {
    const VideoClip& clip = clips_[c];
    require(clip.height() >= opts_.crop && clip.width() >= opts_.crop, "ClipDataset: clip smaller than crop size");
    const auto len = static_cast<std::size_t>(opts_.clip_length);
    for (std::size_t s = 0; s + len <= clip.size(); s += static_cast<std::size_t>(opts_.stride))
      windows_.push_back({c, s});
  }
  require(!windows_.empty(), "ClipDataset: no clip is long enough for one window");
}

ClipDataset ClipDataset::from_clips(std::vector<VideoClip> clips, DatasetOptions opts) {
  return ClipDataset(std::move(clips), std::move(opts));
}

ClipDataset ClipDataset::from_directory(const std::filesystem::path& root, DatasetOptions opts) {
  if (!std::filesystem::is_directory(root)) throw IoError("dataset root is not a directory: " + root.string());
  std::vector<std::filesystem::path> dirs;
  for (const auto& e : std::filesystem::directory_iterator(root))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<VideoClip> clips;
  for (const auto& d : dirs) clips.push_back(io::read_clip_dir(d, ScaleTag::kHighRes));
  if (clips.empty()) throw IoError("dataset root has no clip directories: " + root.string());
  return ClipDataset(std::move(clips), std::move(opts));
}

Sample ClipDataset::get(std::size_t k) const {
  require(k < windows_.size(), "ClipDataset: sample index out of range");
  const Window& w = windows_[k];
  const VideoClip& src = clips_[w.clip];
  auto rng = keyed_rng({opts_.seed, static_cast<std::uint64_t>(k), 0xc409ULL});
  const int crop = opts_.crop;
  std::uniform_int_distribution<int> dy(0, src.height() - crop);
  std::uniform_int_distribution<int> dx(0, src.width() - crop);
  const int top = dy(rng);
  const int left = dx(rng);
  std::vector<Frame> frames;
  for (int i = 0; i < opts_.clip_length; ++i) {
    const Frame& f = src[w.start + static_cast<std::size_t>(i)];
    frames.emplace_back(osdvsr::crop(f.pixels(), top, left, crop, crop), i);
  }
  Sample s;
  s.hr = VideoClip(std::move(frames), ScaleTag::kHighRes);
  s.lr = degrade_clip(s.hr, opts_.degradation, static_cast<std::uint64_t>(k));
  s.index = k;
  return s;
}

}  // namespace osdvsr::data

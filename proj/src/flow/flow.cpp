// SPDX-License-Identifier: Apache-2.0

#include "osdvsr/flow/flow.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

namespace osdvsr::flow {

namespace {

constexpr std::array<char, 8> kFlowMagic = {'O', 'S', 'D', 'F', 'L', 'O', 'W', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("flow file truncated");
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

}  // namespace

BlockMatchingFlow::BlockMatchingFlow(int radius, int block) : radius_(radius), block_(block) {
  require(radius >= 0, "BlockMatchingFlow: radius must be >= 0");
  require(block >= 1, "BlockMatchingFlow: block must be >= 1");
}

std::string BlockMatchingFlow::name() const {
  return "block_matching_r" + std::to_string(radius_) + "_b" + std::to_string(block_);
}

FlowField BlockMatchingFlow::estimate(const Frame& src, const Frame& dst) const {
  require(src.pixels().same_shape(dst.pixels()), "estimate_flow: frame shapes differ");
  const int h = src.height();
  const int w = src.width();
  const int channels = src.channels();
  const Grid& s = src.pixels();
  const Grid& d = dst.pixels();

  // Candidates sorted by (|d|^2, dy, dx) so the first minimum wins ties.
  std::vector<std::array<int, 2>> candidates;
  for (int dy = -radius_; dy <= radius_; ++dy) {
    for (int dx = -radius_; dx <= radius_; ++dx) candidates.push_back({dy, dx});
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    return a[0] * a[0] + a[1] * a[1] < b[0] * b[0] + b[1] * b[1];
  });

  FlowField flow(h, w, FlowDirection::kBackward);
  for (int by = 0; by < h; by += block_) {
    for (int bx = 0; bx < w; bx += block_) {
      const int ey = std::min(by + block_, h);
      const int ex = std::min(bx + block_, w);
      double best = std::numeric_limits<double>::infinity();
      std::array<int, 2> best_d{0, 0};
      for (const auto& cand : candidates) {
        double sad = 0.0;
        for (int c = 0; c < channels && sad < best; ++c) {
          for (int y = by; y < ey; ++y) {
            const int sy = std::clamp(y + cand[0], 0, h - 1);
            for (int x = bx; x < ex; ++x) {
              const int sx = std::clamp(x + cand[1], 0, w - 1);
              sad += std::abs(d.at(c, y, x) - s.at(c, sy, sx));
            }
          }
        }
        if (sad < best) {
          best = sad;
          best_d = cand;
        }
      }
      for (int y = by; y < ey; ++y) {
        for (int x = bx; x < ex; ++x) {
          flow.vectors().at(0, y, x) = best_d[1];
          flow.vectors().at(1, y, x) = best_d[0];
        }
      }
    }
  }
  return flow;
}

void WarpConfidenceParams::validate() const {
  require(std::isfinite(alpha) && alpha > 0.0, "WarpConfidenceParams: alpha must be > 0");
  require(mu >= 0.0 && mu <= 1.0, "WarpConfidenceParams: mu must lie in [0,1]");
}

PixelMask warp_confidence(const Frame& current, std::span<const Frame> warped_neighbors,
                          const WarpConfidenceParams& params) {
  params.validate();
  require(!warped_neighbors.empty(), "warp_confidence: at least one warped neighbour required");
  require(warped_neighbors.size() <= 2, "warp_confidence: at most two neighbours");
  for (const Frame& n : warped_neighbors) {
    require(n.pixels().same_shape(current.pixels()), "warp_confidence: neighbour shape differs");
  }
  const int h = current.height();
  const int w = current.width();
  std::vector<double> values(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double err = 0.0;
      for (const Frame& n : warped_neighbors) {
        for (int c = 0; c < current.channels(); ++c) err += std::abs(n.pixels().at(c, y, x) - current.pixels().at(c, y, x));
      }
      values[static_cast<std::size_t>(y) * w + x] = std::exp(-params.alpha * err);
    }
  }
  return PixelMask(h, w, std::move(values), MaskKind::kSoft);
}

PixelMask binarize_confidence(const PixelMask& soft, double mu) {
  std::vector<double> values(soft.values().size());
  std::transform(soft.values().begin(), soft.values().end(), values.begin(),
                 [mu](double v) { return v > mu ? 1.0 : 0.0; });
  return PixelMask(soft.height(), soft.width(), std::move(values), MaskKind::kHard);
}

FlowCache::FlowCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path FlowCache::entry_path(std::uint64_t key) const {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx.flow", static_cast<unsigned long long>(key));
  return dir_ / buf;
}

std::uint64_t FlowCache::key_for(const std::string& estimator, const Frame& src, const Frame& dst) {
  std::uint64_t h = fnv1a(std::as_bytes(std::span(estimator.data(), estimator.size())));
  const int dims[3] = {src.channels(), src.height(), src.width()};
  h = fnv1a(std::as_bytes(std::span(dims)), h);
  h = hash_values(src.pixels().data(), h);
  return hash_values(dst.pixels().data(), h);
}

bool FlowCache::load(std::uint64_t key, FlowField& out) const {
  const auto path = entry_path(key);
  if (!std::filesystem::exists(path)) return false;
  out = read_flow_file(path);
  return true;
}

void FlowCache::store(std::uint64_t key, const FlowField& flow) const {
  const auto path = entry_path(key);
  const auto tmp = std::filesystem::path(path).concat(".tmp");
  write_flow_file(tmp, flow);
  std::filesystem::rename(tmp, path);
}

void write_flow_file(const std::filesystem::path& path, const FlowField& flow) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write flow file " + path.string());
  os.write(kFlowMagic.data(), kFlowMagic.size());
  put_u32(os, static_cast<std::uint32_t>(flow.height()));
  put_u32(os, static_cast<std::uint32_t>(flow.width()));
  put_u32(os, flow.direction() == FlowDirection::kBackward ? 0u : 1u);
  for (double v : flow.vectors().data()) {
    const auto f = static_cast<float>(v);
    put_u32(os, std::bit_cast<std::uint32_t>(f));
  }
  if (!os) throw IoError("failed writing flow file " + path.string());
}

FlowField read_flow_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open flow file " + path.string());
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kFlowMagic) throw IoError("bad flow file magic: " + path.string());
  const auto h = static_cast<int>(get_u32(is));
  const auto w = static_cast<int>(get_u32(is));
  const auto dir = get_u32(is) == 0 ? FlowDirection::kBackward : FlowDirection::kForward;
  Grid vectors(2, h, w);
  for (double& v : vectors.data()) v = std::bit_cast<float>(get_u32(is));
  return FlowField(std::move(vectors), dir);
}

CachedFlowEstimator::CachedFlowEstimator(std::shared_ptr<const FlowEstimator> inner, FlowCache cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {
  require(inner_ != nullptr, "CachedFlowEstimator: null estimator");
}

FlowField CachedFlowEstimator::estimate(const Frame& src, const Frame& dst) const {
  const auto key = FlowCache::key_for(inner_->name(), src, dst);
  FlowField cached;
  if (cache_.load(key, cached)) return cached;
  FlowField flow = inner_->estimate(src, dst);
  cache_.store(key, flow);
  return flow;
}

}  // namespace osdvsr::flow

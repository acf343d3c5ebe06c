// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>

#include "osdvsr/core/types.hpp"

namespace osdvsr::flow {

/// Dense optical flow behind a swappable interface. estimate(src, dst)
/// returns the displacement that maps dst coordinates into src, i.e.
/// warp(src, estimate(src, dst)) approximates dst.
class FlowEstimator {
 public:
  virtual ~FlowEstimator() = default;
  [[nodiscard]] virtual FlowField estimate(const Frame& src, const Frame& dst) const = 0;
  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual bool deterministic() const = 0;
};

/// Exhaustive integer block matching (sum of absolute differences over all
/// channels). Ties go to the smallest displacement magnitude, then to the
/// first candidate in raster order of (dy, dx). The block's vector is
/// assigned to every pixel of the block.
class BlockMatchingFlow final : public FlowEstimator {
 public:
  explicit BlockMatchingFlow(int radius = 4, int block = 8);

  [[nodiscard]] FlowField estimate(const Frame& src, const Frame& dst) const override;
  [[nodiscard]] std::string name() const override;
  [[nodiscard]] bool deterministic() const override { return true; }

  [[nodiscard]] int radius() const { return radius_; }
  [[nodiscard]] int block() const { return block_; }

 private:
  int radius_;
  int block_;
};

/// alpha scales the exponential warp confidence (shared between the fusion
/// mask and the warp-loss mask); mu is the fusion threshold.
struct WarpConfidenceParams {
  double alpha = 50.0;
  double mu = 0.4;

  void validate() const;
};

/// exp(-alpha * sum_k |warped_k - current|_1) per pixel, where the L1 norm
/// sums over channels. Takes one or two warped neighbours; a boundary frame
/// simply contributes fewer terms.
PixelMask warp_confidence(const Frame& current, std::span<const Frame> warped_neighbors,
                          const WarpConfidenceParams& params);

/// 1 where soft > mu, 0 otherwise (a value equal to mu maps to 0).
PixelMask binarize_confidence(const PixelMask& soft, double mu);

/// On-disk flow cache. Each entry is a little-endian file:
///   magic "OSDFLOW1" (8 bytes), uint32 height, uint32 width, uint32 direction,
///   then the dx plane and the dy plane as float32, row-major.
/// Entries are keyed by the FNV-1a hash of (estimator name, src pixels,
/// dst pixels).
class FlowCache {
 public:
  explicit FlowCache(std::filesystem::path dir);

  [[nodiscard]] std::filesystem::path entry_path(std::uint64_t key) const;
  [[nodiscard]] static std::uint64_t key_for(const std::string& estimator, const Frame& src, const Frame& dst);

  [[nodiscard]] bool load(std::uint64_t key, FlowField& out) const;
  void store(std::uint64_t key, const FlowField& flow) const;

 private:
  std::filesystem::path dir_;
};

void write_flow_file(const std::filesystem::path& path, const FlowField& flow);
FlowField read_flow_file(const std::filesystem::path& path);

/// Decorator that consults a FlowCache before delegating.
class CachedFlowEstimator final : public FlowEstimator {
 public:
  CachedFlowEstimator(std::shared_ptr<const FlowEstimator> inner, FlowCache cache);

  [[nodiscard]] FlowField estimate(const Frame& src, const Frame& dst) const override;
  [[nodiscard]] std::string name() const override { return inner_->name(); }
  [[nodiscard]] bool deterministic() const override { return inner_->deterministic(); }

 private:
  std::shared_ptr<const FlowEstimator> inner_;
  FlowCache cache_;
};

}  // namespace osdvsr::flow

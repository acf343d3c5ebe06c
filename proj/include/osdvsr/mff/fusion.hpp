// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "osdvsr/autograd/tensor.hpp"
#include "osdvsr/core/types.hpp"
#include "osdvsr/flow/flow.hpp"

namespace osdvsr::mff {

/// Learnable query/key projections for the temporal attention. Both are
/// (num_heads, key_dim, latent_dim) and shared across the three temporal
/// slots. There is deliberately no value projection: attention mixes the raw
/// latents so the result stays in the VAE latent space.
struct FusionParams {
  int num_heads = 2;
  int key_dim = 4;
  int latent_dim = 4;
  ag::Tensor w_query;
  ag::Tensor w_key;
  flow::WarpConfidenceParams confidence;

  /// Gaussian init with the given std (near-uniform attention at 0.02).
  static FusionParams init(int num_heads, int key_dim, int latent_dim, std::uint64_t seed, double stddev = 0.02);

  void validate() const;
};

/// The three temporal tokens of one frame plus the latent-resolution hard
/// mask that gates where fusion is applied.
struct FusionInput {
  LatentGrid z_prev_warped;
  LatentGrid z_curr;
  LatentGrid z_next_warped;
  PixelMask hard_mask_latent;

  void validate() const;
};

using AttentionMatrix = std::array<std::array<double, 3>, 3>;

/// Per-head 3x3 attention matrices at one spatial site.
std::vector<AttentionMatrix> attention_weights(const FusionInput& input, const FusionParams& params, int y, int x);

/// Head-averaged attention applied to the raw tokens at one site: rows are
/// the attended [prev, curr, next] latent vectors.
std::array<std::vector<double>, 3> attended_tokens(const FusionInput& input, const FusionParams& params, int y, int x);

/// Mean of the attended tokens blended with z_curr through the hard mask.
/// Sites with mask 0 copy z_curr exactly; identical tokens are returned
/// exactly regardless of the projections.
LatentGrid attention_fuse(const FusionInput& input, const FusionParams& params);

/// Differentiable form. prev/curr/next: (d, h, w); mask: (h, w) constant;
/// w_query/w_key: (heads, key_dim, d).
ag::Tensor attention_fuse(const ag::Tensor& prev, const ag::Tensor& curr, const ag::Tensor& next,
                          std::span<const double> mask, const ag::Tensor& w_query, const ag::Tensor& w_key);

/// Pixel-space half of the fusion input: flow-warped neighbours and the
/// warp-confidence masks of frame i. A missing neighbour (clip boundary) is
/// replaced by the current frame for the latent tokens and left out of the
/// confidence sum; a single-frame clip gets an all-ones mask.
struct AlignedNeighbors {
  Frame prev_warped;
  Frame current;
  Frame next_warped;
  PixelMask soft_confidence;
  PixelMask hard_mask;
  PixelMask hard_mask_latent;
};

AlignedNeighbors align_neighbors(const VideoClip& clip, std::size_t i, const flow::FlowEstimator& flow,
                                 const flow::WarpConfidenceParams& conf, int vae_factor);

using EncodeFn = std::function<LatentGrid(const Frame&)>;

/// Warp in pixel space, then encode all three frames.
FusionInput build_fusion_input(const VideoClip& clip, std::size_t i, const EncodeFn& encoder,
                               const flow::FlowEstimator& flow, const flow::WarpConfidenceParams& conf,
                               int vae_factor);

}  // namespace osdvsr::mff

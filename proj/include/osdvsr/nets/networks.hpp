// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "osdvsr/afat/afat.hpp"
#include "osdvsr/autograd/tensor.hpp"
#include "osdvsr/core/types.hpp"
#include "osdvsr/nets/layers.hpp"

namespace osdvsr::nets {

/// Toy VAE: two stride-2 levels, so spatial_factor is 4. The encoder
/// returns the latent mean directly (no sampling).
class VaeEncoder {
 public:
  VaeEncoder() = default;
  VaeEncoder(int image_channels, int latent_channels, int lora_rank, std::uint64_t seed);

  /// x: (C, H, W) in [0, 1], H and W divisible by 4 -> (d, H/4, W/4).
  [[nodiscard]] ag::Tensor forward(const ag::Tensor& x) const;
  /// Reflect-pads to a multiple of 4 first.
  [[nodiscard]] LatentGrid encode(const Frame& frame) const;

  [[nodiscard]] ParameterList parameters() const;
  [[nodiscard]] int spatial_factor() const { return 4; }
  [[nodiscard]] int latent_channels() const { return latent_channels_; }
  [[nodiscard]] std::vector<const LoraLinear*> adapters() const { return {&mix1_, &head_}; }

 private:
  Conv2d stem_;
  Conv2d down1_;
  LoraLinear mix1_;
  Conv2d down2_;
  LoraLinear head_;
  int latent_channels_ = 4;
};

class VaeDecoder {
 public:
  VaeDecoder() = default;
  VaeDecoder(int image_channels, int latent_channels, std::uint64_t seed);

  /// (d, h, w) -> (C, 4h, 4w), clamped to [0, 1].
  [[nodiscard]] ag::Tensor forward(const ag::Tensor& z) const;
  [[nodiscard]] Frame decode(const LatentGrid& z) const;

  [[nodiscard]] ParameterList parameters() const;
  [[nodiscard]] int latent_channels() const { return latent_channels_; }

 private:
  Conv2d in_;
  Conv2d up1_;
  Conv2d up2_;
  Conv2d out_;
  int latent_channels_ = 4;
};

/// Three-level noise predictor on (d, h, w) latents with h, w divisible by 4.
/// Every 1x1 projection and the bottleneck attention projections carry
/// low-rank adapters. Counts its forward evaluations.
class NoisePredictor {
 public:
  static constexpr int kTimeDim = 16;
  static constexpr int kCondDim = 8;

  NoisePredictor() = default;
  NoisePredictor(int latent_channels, int lora_rank, std::uint64_t seed);

  /// cond: kCondDim values, or empty for the zero vector.
  [[nodiscard]] ag::Tensor forward(const ag::Tensor& z, int t, const std::vector<double>& cond = {}) const;
  [[nodiscard]] LatentGrid predict_noise(const LatentGrid& z, int t, const std::vector<double>& cond = {}) const;

  [[nodiscard]] ParameterList parameters() const;
  [[nodiscard]] std::vector<const LoraLinear*> adapters() const;

  [[nodiscard]] std::uint64_t invocations() const { return invocations_; }
  void reset_invocations() { invocations_ = 0; }

 private:
  Conv2d e1_;
  LoraLinear e1b_;
  Conv2d e2_;
  Conv2d e3_;
  Linear time_proj_;
  Linear cond_proj_;
  LoraLinear q_;
  LoraLinear k_;
  LoraLinear v_;
  LoraLinear o_;
  Conv2d d2_;
  Conv2d d1_;
  LoraLinear out_;
  int latent_channels_ = 4;
  mutable std::uint64_t invocations_ = 0;
};

/// Sinusoidal step embedding of length NoisePredictor::kTimeDim.
std::vector<double> timestep_embedding(int t);

/// Fully convolutional patch embedder: two stride-2 3x3 convs, one stride-1
/// 3x3 conv, then a 1x1 projection to feature_dim. Patch size is therefore 4
/// and the grid is ceil(H/4) x ceil(W/4).
class PatchDiscriminator {
 public:
  PatchDiscriminator() = default;
  PatchDiscriminator(int image_channels, int feature_dim, std::uint64_t seed);

  [[nodiscard]] ag::Tensor forward(const ag::Tensor& x) const;
  [[nodiscard]] afat::PatchFeatureGrid extract_patch_features(const Frame& frame) const;

  [[nodiscard]] ParameterList parameters() const;
  [[nodiscard]] int patch_size() const { return 4; }
  [[nodiscard]] int feature_dim() const { return feature_dim_; }

 private:
  Conv2d c1_;
  Conv2d c2_;
  Conv2d c3_;
  Conv2d proj_;
  int feature_dim_ = 16;
};

}  // namespace osdvsr::nets

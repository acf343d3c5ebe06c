// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <vector>

#include "osdvsr/diffusion/diffusion.hpp"
#include "osdvsr/flow/flow.hpp"
#include "osdvsr/harness/config.hpp"
#include "osdvsr/mff/fusion.hpp"
#include "osdvsr/nets/networks.hpp"

namespace osdvsr::harness {

/// The full trainable system: generator (VAE encoder + MFF + UNet, frozen VAE
/// decoder) and the adjacent-frame discriminator.
struct Model {
  nets::VaeEncoder encoder;
  nets::VaeDecoder decoder;
  nets::NoisePredictor unet;
  mff::FusionParams mff;
  nets::PatchDiscriminator discriminator;
  diffusion::NoiseSchedule schedule = diffusion::NoiseSchedule::cosine();
  bool use_mff = true;
  int image_channels = 3;
  std::vector<double> conditioning;  // empty: zero prompt embedding

  static Model create(const RunConfig& cfg, int image_channels = 3);
  /// Fresh parameters with the same architecture, values copied from this.
  [[nodiscard]] Model clone(const RunConfig& cfg) const;

  /// Every parameter, in a fixed order (checkpoint order).
  [[nodiscard]] nets::ParameterList parameters() const;
  [[nodiscard]] nets::ParameterList group(const std::string& name) const;
  /// encoder_lora + unet_lora + mff.
  [[nodiscard]] nets::ParameterList generator_trainable() const;
  [[nodiscard]] nets::ParameterList discriminator_params() const { return discriminator.parameters(); }

  /// Freezes everything except the adapters, the fusion projections and the
  /// discriminator.
  void enter_finetune_regime() const;
};

/// Per-clip quantities that depend only on the LR input: the x4 bilinear
/// upsampling and, per frame, the flow-aligned neighbours and fusion masks.
struct PreparedClip {
  VideoClip lr;
  VideoClip upsampled;
  std::vector<mff::AlignedNeighbors> aligned;
};

VideoClip upsample_clip(const VideoClip& lr, int factor = 4);
PreparedClip prepare_clip(const VideoClip& lr, const flow::FlowEstimator& flow,
                          const flow::WarpConfidenceParams& conf);

/// Latents entering the noise predictor for frame i (fused when MFF is on).
ag::Tensor fused_latent(const Model& model, const PreparedClip& clip, std::size_t i);

/// One-step generator output for frame i: (C, 4h, 4w) in [0, 1]. Exactly one
/// noise-predictor call.
ag::Tensor generate_frame(const Model& model, const PreparedClip& clip, std::size_t i);

}  // namespace osdvsr::harness

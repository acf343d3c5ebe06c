// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "osdvsr/data/degradation.hpp"

namespace osdvsr::harness {

enum class UpdateScheme { kAlternating, kSimultaneous };
enum class UpdateOrder { kDiscriminatorFirst, kGeneratorFirst };

/// Every hyperparameter of a run. Field defaults are the full-scale values;
/// RunConfig::toy() shrinks everything to CPU size.
struct RunConfig {
  std::uint64_t seed = 0;

  // schedule
  int batch_size = 8;
  int epochs = 150;
  /// Total optimizer steps; 0 derives it from epochs and the dataset size.
  int steps = 0;
  int log_every = 10;

  // generator optimizer (AdamW)
  double gen_lr = 1e-5;
  double gen_weight_decay = 1e-8;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  // discriminator optimizer (SGD, linear warmup)
  double disc_lr = 5e-4;
  int disc_warmup = 500;

  UpdateScheme update_scheme = UpdateScheme::kAlternating;
  UpdateOrder update_order = UpdateOrder::kDiscriminatorFirst;

  // objectives
  double tau = 100.0;
  double mu = 0.4;
  double gamma = 1.0;
  double alpha = 50.0;
  double w_gan = 1.0;
  double w_fmse = 1.0;
  double w_lpips = 2.0;
  double w_warp = 2.0;

  // model
  int lora_rank = 32;
  int latent_channels = 4;
  int mff_heads = 2;
  int mff_key_dim = 4;
  double mff_init_std = 0.02;
  bool use_mff = true;
  int disc_dim = 16;
  int timesteps = 1000;
  double alpha_final = 0.5;
  int flow_radius = 4;
  int flow_block = 8;

  // stand-in for pretrained weights
  int pretrain_vae_steps = 0;
  int pretrain_unet_steps = 0;
  double pretrain_lr = 2e-3;
  int pretrain_batch = 4;

  // data
  std::string data_root;  // empty: procedurally generated clips
  int num_clips = 8;
  int clip_length = 3;
  int crop = 64;
  std::string degradation = "realesrgan";  // realesrgan | identity | light
  data::DegradationConfig degradation_cfg;

  std::string out_dir = "run";

  static RunConfig toy();
  void validate() const;
  /// Canonical key = value text (round-trips through parse_config).
  [[nodiscard]] std::string to_text() const;
};

/// key = value lines, '#' comments. A `preset = toy|full` line selects the
/// base values; every other key overrides it regardless of line order.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

data::DegradationConfig degradation_preset(const std::string& name);

}  // namespace osdvsr::harness

// SPDX-License-Identifier: Apache-2.0

#include "osdvsr/harness/model.hpp"

#include <algorithm>

#include "osdvsr/autograd/ops.hpp"
#include "osdvsr/core/geometry.hpp"

namespace osdvsr::harness {

Model Model::create(const RunConfig& cfg, int image_channels) {
  cfg.validate();
  Model m;
  m.encoder = nets::VaeEncoder(image_channels, cfg.latent_channels, cfg.lora_rank, cfg.seed);
  m.decoder = nets::VaeDecoder(image_channels, cfg.latent_channels, cfg.seed);
  m.unet = nets::NoisePredictor(cfg.latent_channels, cfg.lora_rank, cfg.seed);
  m.mff = mff::FusionParams::init(cfg.mff_heads, cfg.mff_key_dim, cfg.latent_channels, cfg.seed * 7919 + 5,
                                  cfg.mff_init_std);
  m.mff.confidence = flow::WarpConfidenceParams{cfg.alpha, cfg.mu};
  m.discriminator = nets::PatchDiscriminator(image_channels, cfg.disc_dim, cfg.seed);
  m.schedule = diffusion::NoiseSchedule::cosine(cfg.timesteps, cfg.alpha_final);
  m.use_mff = cfg.use_mff;
  m.image_channels = image_channels;
  return m;
}

Model Model::clone(const RunConfig& cfg) const {
  Model m = create(cfg, image_channels);
  const auto src = parameters();
  const auto dst = m.parameters();
  require(src.size() == dst.size(), "Model::clone: architecture mismatch");
  for (std::size_t i = 0; i < src.size(); ++i) {
    require(src[i].name == dst[i].name && src[i].tensor.shape() == dst[i].tensor.shape(),
            "Model::clone: architecture mismatch");
    ag::Tensor t = dst[i].tensor;
    std::copy(src[i].tensor.values().begin(), src[i].tensor.values().end(), t.mutable_values().begin());
    t.set_requires_grad(src[i].tensor.requires_grad());
  }
  m.use_mff = use_mff;
  m.conditioning = conditioning;
  return m;
}

nets::ParameterList Model::parameters() const {
  nets::ParameterList out = encoder.parameters();
  for (auto& p : decoder.parameters()) out.push_back(p);
  for (auto& p : unet.parameters()) out.push_back(p);
  out.push_back({"mff.w_query", "mff", mff.w_query});
  out.push_back({"mff.w_key", "mff", mff.w_key});
  for (auto& p : discriminator.parameters()) out.push_back(p);
  return out;
}

nets::ParameterList Model::group(const std::string& name) const {
  nets::ParameterList out;
  for (auto& p : parameters())
    if (p.group == name) out.push_back(p);
  return out;
}

nets::ParameterList Model::generator_trainable() const {
  nets::ParameterList out = group("encoder_lora");
  for (auto& p : group("unet_lora")) out.push_back(p);
  for (auto& p : group("mff")) out.push_back(p);
  return out;
}

void Model::enter_finetune_regime() const {
  for (const auto& p : parameters()) {
    const bool trainable = p.group == "encoder_lora" || p.group == "unet_lora" || p.group == "mff" ||
                           p.group == "discriminator";
    ag::Tensor t = p.tensor;
    t.set_requires_grad(trainable);
  }
}

VideoClip upsample_clip(const VideoClip& lr, int factor) {
  std::vector<Frame> frames;
  for (const Frame& f : lr.frames()) {
    frames.push_back(clamp_to_frame(resize(f.pixels(), f.height() * factor, f.width() * factor,
                                           Interpolation::kBilinear),
                                    f.index()));
  }
  return VideoClip(std::move(frames), ScaleTag::kHighRes);
}

PreparedClip prepare_clip(const VideoClip& lr, const flow::FlowEstimator& flow,
                          const flow::WarpConfidenceParams& conf) {
  PreparedClip p;
  p.lr = lr;
  p.upsampled = upsample_clip(lr);
  for (std::size_t i = 0; i < lr.size(); ++i) p.aligned.push_back(mff::align_neighbors(p.upsampled, i, flow, conf, 4));
  return p;
}

ag::Tensor fused_latent(const Model& model, const PreparedClip& clip, std::size_t i) {
  require(i < clip.aligned.size(), "fused_latent: frame index out of range");
  const mff::AlignedNeighbors& a = clip.aligned[i];
  const ag::Tensor curr = model.encoder.forward(ag::Tensor::from_grid(a.current.pixels()));
  if (!model.use_mff) return curr;
  const ag::Tensor prev = model.encoder.forward(ag::Tensor::from_grid(a.prev_warped.pixels()));
  const ag::Tensor next = model.encoder.forward(ag::Tensor::from_grid(a.next_warped.pixels()));
  return mff::attention_fuse(prev, curr, next, a.hard_mask_latent.values(), model.mff.w_query, model.mff.w_key);
}

ag::Tensor generate_frame(const Model& model, const PreparedClip& clip, std::size_t i) {
  const ag::Tensor z = fused_latent(model, clip, i);
  const int t = model.schedule.total_steps();
  const ag::Tensor eps = model.unet.forward(z, t, model.conditioning);
  return model.decoder.forward(diffusion::one_step_denoise(z, eps, model.schedule));
}

}  // namespace osdvsr::harness

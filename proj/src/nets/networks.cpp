// SPDX-License-Identifier: Apache-2.0

#include "osdvsr/nets/networks.hpp"

#include <cmath>

#include "osdvsr/autograd/ops.hpp"
#include "osdvsr/core/geometry.hpp"

namespace osdvsr::nets {

namespace {

std::mt19937_64 seeded(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt)};
  return std::mt19937_64(seq);
}

}  // namespace

VaeEncoder::VaeEncoder(int image_channels, int latent_channels, int lora_rank, std::uint64_t seed)
    : latent_channels_(latent_channels) {
  auto rng = seeded(seed, 1);
  stem_ = Conv2d(image_channels, 8, 3, 1, rng);
  down1_ = Conv2d(8, 16, 3, 2, rng);
  mix1_ = LoraLinear(16, 16, lora_rank, rng);
  down2_ = Conv2d(16, 32, 3, 2, rng);
  head_ = LoraLinear(32, latent_channels, lora_rank, rng);
}

ag::Tensor VaeEncoder::forward(const ag::Tensor& x) const {
  require(x.shape().size() == 3 && x.dim(1) % 4 == 0 && x.dim(2) % 4 == 0,
          "VaeEncoder: input must be (C, H, W) with H, W divisible by 4");
  ag::Tensor h = ag::silu(stem_.forward(ag::add_scalar(x, -0.5)));
  h = ag::silu(down1_.forward(h));
  h = ag::silu(mix1_.forward_map(h));
  h = ag::silu(down2_.forward(h));
  return head_.forward_map(h);
}

LatentGrid VaeEncoder::encode(const Frame& frame) const {
  const Grid padded = pad_reflect_to_multiple(frame.pixels(), 4);
  return LatentGrid(forward(ag::Tensor::from_grid(padded)).to_grid(), frame.index());
}

ParameterList VaeEncoder::parameters() const {
  ParameterList out;
  stem_.collect(out, "encoder.stem", "encoder_base");
  down1_.collect(out, "encoder.down1", "encoder_base");
  mix1_.collect(out, "encoder.mix1", "encoder_base", "encoder_lora");
  down2_.collect(out, "encoder.down2", "encoder_base");
  head_.collect(out, "encoder.head", "encoder_base", "encoder_lora");
  return out;
}

VaeDecoder::VaeDecoder(int image_channels, int latent_channels, std::uint64_t seed)
    : latent_channels_(latent_channels) {
  auto rng = seeded(seed, 2);
  in_ = Conv2d(latent_channels, 32, 3, 1, rng);
  up1_ = Conv2d(32, 16, 3, 1, rng);
  up2_ = Conv2d(16, 8, 3, 1, rng);
  out_ = Conv2d(8, image_channels, 3, 1, rng);
}

ag::Tensor VaeDecoder::forward(const ag::Tensor& z) const {
  require(z.shape().size() == 3 && z.dim(0) == latent_channels_, "VaeDecoder: latent channel mismatch");
  ag::Tensor h = ag::silu(in_.forward(z));
  h = ag::silu(up1_.forward(ag::upsample_nearest(h, 2)));
  h = ag::silu(up2_.forward(ag::upsample_nearest(h, 2)));
  return ag::clamp(ag::add_scalar(out_.forward(h), 0.5), 0.0, 1.0);
}

Frame VaeDecoder::decode(const LatentGrid& z) const {
  return clamp_to_frame(forward(ag::Tensor::from_grid(z.values())).to_grid(), z.source_frame_index());
}

ParameterList VaeDecoder::parameters() const {
  ParameterList out;
  in_.collect(out, "decoder.in", "decoder");
  up1_.collect(out, "decoder.up1", "decoder");
  up2_.collect(out, "decoder.up2", "decoder");
  out_.collect(out, "decoder.out", "decoder");
  return out;
}

std::vector<double> timestep_embedding(int t) {
  constexpr int half = NoisePredictor::kTimeDim / 2;
  std::vector<double> e(NoisePredictor::kTimeDim);
  for (int k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * k / half);
    e[static_cast<std::size_t>(k)] = std::sin(t * freq);
    e[static_cast<std::size_t>(k + half)] = std::cos(t * freq);
  }
  return e;
}

NoisePredictor::NoisePredictor(int latent_channels, int lora_rank, std::uint64_t seed)
    : latent_channels_(latent_channels) {
  auto rng = seeded(seed, 3);
  e1_ = Conv2d(latent_channels, 16, 3, 1, rng);
  e1b_ = LoraLinear(16, 16, lora_rank, rng);
  e2_ = Conv2d(16, 32, 3, 2, rng);
  e3_ = Conv2d(32, 32, 3, 2, rng);
  time_proj_ = Linear(kTimeDim, 32, rng);
  cond_proj_ = Linear(kCondDim, 32, rng);
  q_ = LoraLinear(32, 32, lora_rank, rng);
  k_ = LoraLinear(32, 32, lora_rank, rng);
  v_ = LoraLinear(32, 32, lora_rank, rng);
  o_ = LoraLinear(32, 32, lora_rank, rng);
  d2_ = Conv2d(64, 32, 3, 1, rng);
  d1_ = Conv2d(48, 16, 3, 1, rng);
  out_ = LoraLinear(16, latent_channels, lora_rank, rng);
}

ag::Tensor NoisePredictor::forward(const ag::Tensor& z, int t, const std::vector<double>& cond) const {
  require(z.shape().size() == 3 && z.dim(0) == latent_channels_ && z.dim(1) % 4 == 0 && z.dim(2) % 4 == 0,
          "NoisePredictor: latent must be (d, h, w) with h, w divisible by 4");
  require(cond.empty() || static_cast<int>(cond.size()) == kCondDim, "NoisePredictor: conditioning size mismatch");
  ++invocations_;

  const ag::Tensor h1 = ag::silu(e1b_.forward_map(ag::silu(e1_.forward(z))));
  const ag::Tensor h2 = ag::silu(e2_.forward(h1));
  ag::Tensor h3 = ag::silu(e3_.forward(h2));

  const ag::Tensor temb = ag::silu(time_proj_.forward(ag::Tensor::constant({kTimeDim}, timestep_embedding(t))));
  const std::vector<double> c = cond.empty() ? std::vector<double>(kCondDim, 0.0) : cond;
  const ag::Tensor cemb = cond_proj_.forward(ag::Tensor::constant({kCondDim}, c));
  h3 = ag::add_channel_bias(h3, ag::add(temb, cemb));

  // bottleneck self-attention over the h3 sites
  const int ch = h3.dim(0);
  const int bh = h3.dim(1);
  const int bw = h3.dim(2);
  const ag::Tensor tokens = ag::reshape(h3, {ch, bh * bw});
  const ag::Tensor q = q_.forward_columns(tokens);
  const ag::Tensor k = k_.forward_columns(tokens);
  const ag::Tensor v = v_.forward_columns(tokens);
  const ag::Tensor scores = ag::scale(ag::matmul(ag::transpose(q), k), 1.0 / std::sqrt(static_cast<double>(ch)));
  const ag::Tensor attn = ag::softmax_rows(scores);
  const ag::Tensor mixed = ag::matmul(v, ag::transpose(attn));
  h3 = ag::add(h3, ag::reshape(o_.forward_columns(mixed), {ch, bh, bw}));

  ag::Tensor u = ag::silu(d2_.forward(ag::concat_channels(ag::upsample_nearest(h3, 2), h2)));
  u = ag::silu(d1_.forward(ag::concat_channels(ag::upsample_nearest(u, 2), h1)));
  return out_.forward_map(u);
}

LatentGrid NoisePredictor::predict_noise(const LatentGrid& z, int t, const std::vector<double>& cond) const {
  return LatentGrid(forward(ag::Tensor::from_grid(z.values()), t, cond).to_grid(), z.source_frame_index());
}

ParameterList NoisePredictor::parameters() const {
  ParameterList out;
  e1_.collect(out, "unet.e1", "unet_base");
  e1b_.collect(out, "unet.e1b", "unet_base", "unet_lora");
  e2_.collect(out, "unet.e2", "unet_base");
  e3_.collect(out, "unet.e3", "unet_base");
  time_proj_.collect(out, "unet.time_proj", "unet_base");
  cond_proj_.collect(out, "unet.cond_proj", "unet_base");
  q_.collect(out, "unet.attn.q", "unet_base", "unet_lora");
  k_.collect(out, "unet.attn.k", "unet_base", "unet_lora");
  v_.collect(out, "unet.attn.v", "unet_base", "unet_lora");
  o_.collect(out, "unet.attn.o", "unet_base", "unet_lora");
  d2_.collect(out, "unet.d2", "unet_base");
  d1_.collect(out, "unet.d1", "unet_base");
  out_.collect(out, "unet.out", "unet_base", "unet_lora");
  return out;
}

std::vector<const LoraLinear*> NoisePredictor::adapters() const { return {&e1b_, &q_, &k_, &v_, &o_, &out_}; }

PatchDiscriminator::PatchDiscriminator(int image_channels, int feature_dim, std::uint64_t seed)
    : feature_dim_(feature_dim) {
  require(feature_dim >= 4, "PatchDiscriminator: feature_dim must be >= 4");
  auto rng = seeded(seed, 4);
  c1_ = Conv2d(image_channels, 16, 3, 2, rng);
  c2_ = Conv2d(16, 32, 3, 2, rng);
  c3_ = Conv2d(32, 32, 3, 1, rng);
  proj_ = Conv2d(32, feature_dim, 1, 1, rng);
  // a non-zero bias keeps every patch embedding away from the zero vector
  std::normal_distribution<double> normal(0.0, 0.5);
  ag::Tensor b = proj_.bias();
  for (double& v : b.mutable_values()) v = normal(rng);
}

ag::Tensor PatchDiscriminator::forward(const ag::Tensor& x) const {
  require(x.shape().size() == 3 && x.dim(1) > 4 && x.dim(2) > 4, "PatchDiscriminator: frame smaller than a patch");
  ag::Tensor h = ag::silu(c1_.forward(ag::add_scalar(x, -0.5)));
  h = ag::silu(c2_.forward(h));
  h = ag::silu(c3_.forward(h));
  return proj_.forward(h);
}

afat::PatchFeatureGrid PatchDiscriminator::extract_patch_features(const Frame& frame) const {
  return afat::PatchFeatureGrid(forward(ag::Tensor::from_grid(frame.pixels())).to_grid(), patch_size());
}

ParameterList PatchDiscriminator::parameters() const {
  ParameterList out;
  c1_.collect(out, "disc.c1", "discriminator");
  c2_.collect(out, "disc.c2", "discriminator");
  c3_.collect(out, "disc.c3", "discriminator");
  proj_.collect(out, "disc.proj", "discriminator");
  return out;
}

}  // namespace osdvsr::nets

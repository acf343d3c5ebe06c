// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <filesystem>

#include "osdvsr/autograd/ops.hpp"
#include "osdvsr/data/demo.hpp"
#include "osdvsr/harness/trainer.hpp"
#include "osdvsr/nets/checkpoint.hpp"
#include "osdvsr/nets/networks.hpp"
#include "support.hpp"

using namespace osdvsr;
using namespace osdvsr::testing;

namespace {

void fill(const ag::Tensor& t, std::uint64_t seed, double scale) {
  ag::Tensor h = t;
  auto v = random_values(h.numel(), seed, -scale, scale);
  std::copy(v.begin(), v.end(), h.mutable_values().begin());
}

}  // namespace

TEST(Vae, ShapesAndDeterminism) {
  const nets::VaeEncoder enc(3, 4, 4, 1);
  const nets::VaeDecoder dec(3, 4, 1);
  const Frame f(random_grid(3, 32, 32, 2));
  const LatentGrid z = enc.encode(f);
  EXPECT_EQ(z.channels(), 4);
  EXPECT_EQ(z.height(), 8);
  EXPECT_EQ(z.width(), 8);
  EXPECT_EQ(enc.encode(f), z);
  const Frame back = dec.decode(z);
  EXPECT_EQ(back.height(), 32);
  EXPECT_EQ(back.channels(), 3);
  // Non-multiple sizes are reflect-padded.
  EXPECT_EQ(enc.encode(Frame(random_grid(3, 30, 29, 3))).height(), 8);
}

TEST(Vae, DecoderClampsExtremeLatents) {
  const nets::VaeDecoder dec(3, 4, 5);
  for (double mag : {-1e3, 1e3}) {
    const Frame out = dec.decode(LatentGrid(random_grid(4, 4, 4, 6, mag, 2 * mag)));
    for (double v : out.pixels().data()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Vae, PretrainedAutoencoderReachesPsnr) {
  harness::RunConfig cfg = harness::RunConfig::toy();
  cfg.pretrain_vae_steps = 150;
  cfg.pretrain_unet_steps = 0;
  const auto clips = data::make_demo_set(2, 2, 32, 0);
  harness::Model m = harness::Model::create(cfg);
  const auto rep = harness::pretrain(m, clips, cfg);
  EXPECT_GE(rep.vae_psnr_db, 25.0);
}

TEST(Lora, ZeroAdapterLeavesBaseOutput) {
  std::mt19937_64 rng(3);
  const nets::LoraLinear l(6, 5, 2, rng);
  for (double v : l.delta()) EXPECT_EQ(v, 0.0);
  const auto x = ag::Tensor::from_grid(random_grid(6, 3, 3, 4, -1, 1));
  const auto before = l.forward_map(x);
  fill(l.lora_b(), 5, 0.5);
  const auto changed = l.forward_map(x);
  EXPECT_GT(max_abs_diff(before.values(), changed.values()), 1e-6);
  fill(l.lora_b(), 5, 0.0);
  EXPECT_EQ(max_abs_diff(before.values(), l.forward_map(x).values()), 0.0);
}

TEST(Lora, DeltaRankBoundedByR) {
  std::mt19937_64 rng(4);
  for (int r : {1, 2, 3}) {
    const nets::LoraLinear l(8, 7, r, rng);
    fill(l.lora_b(), 10 + r, 1.0);
    const auto d = l.delta();
    Eigen::MatrixXd m(7, 8);
    for (int i = 0; i < 7; ++i)
      for (int j = 0; j < 8; ++j) m(i, j) = d[static_cast<std::size_t>(i * 8 + j)];
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    lu.setThreshold(1e-10);
    EXPECT_EQ(lu.rank(), r);
  }
}

TEST(NoisePredictor, ShapeZeroAdapterAndCounter) {
  const nets::NoisePredictor unet(4, 4, 7);
  const LatentGrid z(random_grid(4, 8, 8, 8, -1, 1));
  const LatentGrid e = unet.predict_noise(z, 1000);
  EXPECT_TRUE(e.values().same_shape(z.values()));
  EXPECT_EQ(unet.invocations(), 1u);
  for (const auto* a : unet.adapters())
    for (double v : a->delta()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(unet.predict_noise(z, 1000), e);
  EXPECT_EQ(unet.invocations(), 2u);
  fill(unet.adapters().back()->lora_b(), 9, 0.3);
  EXPECT_NE(unet.predict_noise(z, 1000), e);
  EXPECT_NE(unet.predict_noise(z, 10), unet.predict_noise(z, 1000));
  std::vector<double> cond(nets::NoisePredictor::kCondDim, 0.0);
  EXPECT_EQ(unet.predict_noise(z, 1000, cond), unet.predict_noise(z, 1000));
}

TEST(NoisePredictor, GradientReachesAdaptersOnlyWhenBaseFrozen) {
  const nets::NoisePredictor unet(4, 2, 11);
  for (const auto& p : unet.parameters()) {
    ag::Tensor t = p.tensor;
    t.set_requires_grad(p.group == "unet_lora");
  }
  const auto z = ag::Tensor::from_grid(random_grid(4, 4, 4, 12, -1, 1));
  ag::sum(ag::square(unet.forward(z, 1000))).backward();
  bool any_b = false;
  for (const auto& p : unet.parameters()) {
    if (p.group != "unet_lora") {
      EXPECT_FALSE(p.tensor.requires_grad());
      continue;
    }
    if (p.name.ends_with(".lora_b"))
      for (double g : p.tensor.grad()) any_b |= g != 0.0;
  }
  EXPECT_TRUE(any_b);
}

TEST(Discriminator, ShapeAndDeterminism) {
  const nets::PatchDiscriminator d(3, 16, 13);
  const auto f = d.extract_patch_features(Frame(random_grid(3, 30, 17, 14)));
  EXPECT_EQ(f.rows(), 8);
  EXPECT_EQ(f.cols(), 5);
  EXPECT_EQ(f.dim(), 16);
  EXPECT_EQ(f.patch_size(), 4);
  EXPECT_EQ(d.extract_patch_features(Frame(random_grid(3, 30, 17, 14))).features(), f.features());
  for (int p = 0; p < f.rows(); ++p)
    for (int q = 0; q < f.cols(); ++q) {
      double n = 0.0;
      for (int c = 0; c < f.dim(); ++c) n += f.features().at(c, p, q) * f.features().at(c, p, q);
      EXPECT_GT(n, 0.0);
    }
}

TEST(Discriminator, OnePatchTranslationShiftsOneCell) {
  const nets::PatchDiscriminator d(3, 8, 15);
  const Grid img = random_grid(3, 32, 32, 16);
  Grid shifted(3, 32, 32, 0.5);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 32; ++y)
      for (int x = 4; x < 32; ++x) shifted.at(c, y, x) = img.at(c, y, x - 4);
  const Grid a = d.extract_patch_features(Frame(img)).features();
  const Grid b = d.extract_patch_features(Frame(shifted)).features();
  for (int c = 0; c < 8; ++c)
    for (int p = 1; p < 7; ++p)
      for (int q = 2; q < 7; ++q) EXPECT_NEAR(b.at(c, p, q), a.at(c, p, q - 1), 1e-12);
}

TEST(Checkpoint, RoundTripAndLoad) {
  harness::RunConfig cfg = harness::RunConfig::toy();
  const harness::Model a = harness::Model::create(cfg);
  cfg.seed = 99;
  const harness::Model b = harness::Model::create(cfg);
  const auto dir = std::filesystem::temp_directory_path() / "osdvsr_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "a.osd";
  const std::uint64_t h = nets::write_checkpoint(path, "seed = 0\n", a.parameters());
  const nets::Checkpoint ck = nets::read_checkpoint(path);
  EXPECT_EQ(ck.content_hash, h);
  EXPECT_EQ(ck.config_text, "seed = 0\n");
  EXPECT_EQ(ck.tensors.size(), a.parameters().size());
  EXPECT_EQ(ck.group_hashes.count("unet_lora"), 1u);

  EXPECT_NE(nets::parameters_hash(a.parameters()), nets::parameters_hash(b.parameters()));
  nets::load_parameters(ck, b.parameters());
  // float32 storage: values agree to single precision.
  const auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::size_t j = 0; j < pa[i].tensor.numel(); ++j)
      EXPECT_EQ(static_cast<float>(pa[i].tensor.values()[j]), pb[i].tensor.values()[j]);
  // Re-serializing the loaded parameters reproduces the archive exactly.
  std::uint64_t h2 = 0;
  (void)nets::serialize_checkpoint("seed = 0\n", b.parameters(), &h2);
  EXPECT_EQ(h2, h);
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, CorruptionDetected) {
  const harness::Model m = harness::Model::create(harness::RunConfig::toy());
  auto bytes = nets::serialize_checkpoint("x = 1\n", m.parameters());
  EXPECT_NO_THROW(nets::parse_checkpoint(bytes));
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= std::byte{0x10};
  EXPECT_THROW(nets::parse_checkpoint(flipped), IoError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 5);
  EXPECT_THROW(nets::parse_checkpoint(truncated), IoError);
  auto bad_magic = bytes;
  bad_magic[0] = std::byte{'X'};
  EXPECT_THROW(nets::parse_checkpoint(bad_magic), IoError);

  const nets::Checkpoint ck = nets::parse_checkpoint(bytes);
  nets::ParameterList extra = m.parameters();
  extra.push_back({"not.there", "mff", ag::Tensor::parameter({1}, {0.0})});
  EXPECT_THROW(nets::load_parameters(ck, extra), IoError);
}

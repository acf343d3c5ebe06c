// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "osdvsr/afat/afat.hpp"
#include "osdvsr/autograd/ops.hpp"
#include "support.hpp"

using namespace osdvsr;
using namespace osdvsr::testing;
using afat::PatchFeatureGrid;

namespace {

PatchFeatureGrid grid(int d, int p, int q, std::uint64_t seed) { return {random_grid(d, p, q, seed, -1, 1), 4}; }

PatchFeatureGrid scaled(const PatchFeatureGrid& g, double s) {
  Grid f = g.features();
  for (double& v : f.data()) v *= s;
  return {f, g.patch_size()};
}

// 1x1 grids with chosen unit vectors.
PatchFeatureGrid unit(std::vector<double> v) {
  const int d = static_cast<int>(v.size());
  return {Grid(d, 1, 1, std::move(v)), 1};
}

}  // namespace

TEST(PatchCosine, IdentityOppositeAndOracle) {
  const auto a = grid(3, 2, 2, 1), b = grid(3, 2, 2, 2);
  const Grid same = afat::patch_cosine_grid(a, a), opposite = afat::patch_cosine_grid(a, scaled(a, -1.0));
  for (double v : same.data()) EXPECT_NEAR(v, 1.0, 1e-15);
  for (double v : opposite.data()) EXPECT_NEAR(v, -1.0, 1e-15);
  const Grid c = afat::patch_cosine_grid(a, b);
  for (int p = 0; p < 2; ++p)
    for (int q = 0; q < 2; ++q) EXPECT_NEAR(c.at(0, p, q), oracle::cosine_at(a.features(), b.features(), p, q), 1e-12);
}

TEST(PatchCosine, ZeroFeatureThrows) {
  EXPECT_THROW(afat::patch_cosine_grid(unit({0, 0, 0}), unit({1, 0, 0})), ContractViolation);
}

TEST(DiscriminatorLoss, EqualLogitsGiveLn2) {
  const auto prev = grid(4, 3, 3, 1), real = grid(4, 3, 3, 2);
  for (double tau : {0.01, 1.0, 100.0}) EXPECT_NEAR(afat::discriminator_loss(prev, real, real, tau), std::log(2.0), 1e-15);
}

TEST(DiscriminatorLoss, ScalarExamples) {
  // real-pair similarity 1, fake-pair similarity -1.
  const auto prev = unit({1, 0, 0, 0}), real = unit({1, 0, 0, 0}), fake = unit({-1, 0, 0, 0});
  EXPECT_NEAR(afat::discriminator_loss(prev, real, fake, 1.0), -std::log(std::exp(1.0) / (std::exp(1.0) + std::exp(-1.0))),
              1e-12);
  EXPECT_NEAR(afat::discriminator_loss(prev, real, fake, 1.0), 0.126928, 1e-6);
  EXPECT_NEAR(afat::discriminator_loss(prev, real, fake, 100.0), std::log1p(std::exp(-0.02)), 1e-12);
  EXPECT_NEAR(afat::discriminator_loss(prev, real, fake, 100.0), 0.683197, 1e-6);
}

TEST(DiscriminatorLoss, MatchesOracleNonNegativeScaleInvariant) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = grid(5, 3, 4, seed), r = grid(5, 3, 4, seed + 100), f = grid(5, 3, 4, seed + 200);
    for (double tau : {0.5, 100.0}) {
      const double l = afat::discriminator_loss(p, r, f, tau);
      EXPECT_NEAR(l, oracle::discriminator_loss(p.features(), r.features(), f.features(), tau), 1e-12);
      EXPECT_GE(l, 0.0);
      EXPECT_NEAR(afat::discriminator_loss(scaled(p, 3.7), scaled(r, 3.7), scaled(f, 3.7), tau), l, 1e-12);
    }
  }
}

TEST(DiscriminatorLoss, ApproachesZero) {
  const auto prev = unit({1, 0}), fake = unit({-1, 0});
  EXPECT_LT(afat::discriminator_loss(prev, prev, fake, 0.05), 1e-15 + std::log1p(std::exp(-40.0)));
}

TEST(DiscriminatorLoss, GradientCheck) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto a = random_param({4, 1, 1}, seed), b = random_param({4, 1, 1}, seed + 30), c = random_param({4, 1, 1}, seed + 60);
    EXPECT_LT(gradcheck([](auto& l) { return afat::discriminator_loss(l[0], l[1], l[2], 0.7); }, {a, b, c}), 1e-4);
  }
}

TEST(GeneratorLoss, ExamplesAndOracle) {
  const auto a = grid(4, 2, 3, 1);
  EXPECT_NEAR(afat::generator_adv_loss(a, a), -1.0, 1e-15);
  EXPECT_NEAR(afat::generator_adv_loss(unit({1, 0}), unit({0, 2})), 0.0, 1e-15);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = grid(6, 3, 2, seed), f = grid(6, 3, 2, seed + 9);
    const double l = afat::generator_adv_loss(p, f);
    EXPECT_NEAR(l, oracle::generator_loss(p.features(), f.features()), 1e-12);
    EXPECT_GE(l, -1.0);
    EXPECT_LE(l, 1.0);
  }
}

TEST(GeneratorLoss, GradientCheck) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto a = random_param({4, 1, 1}, seed), b = random_param({4, 1, 1}, seed + 40);
    EXPECT_LT(gradcheck([](auto& l) { return afat::generator_adv_loss(l[0], l[1]); }, {a, b}), 1e-4);
  }
}

TEST(FocalModulator, Constants) {
  const auto a = grid(4, 2, 2, 3);
  const PixelMask same = afat::focal_modulator(a, a, 8, 8), opposite = afat::focal_modulator(a, scaled(a, -2.0), 8, 8);
  for (double v : same.values()) EXPECT_NEAR(v, 0.0, 1e-15);
  for (double v : opposite.values()) EXPECT_NEAR(v, 1.0, 1e-15);
  const PatchFeatureGrid x(Grid(2, 1, 1, std::vector<double>{1, 0}), 4), y(Grid(2, 1, 1, std::vector<double>{0, 1}), 4);
  const PixelMask orth = afat::focal_modulator(x, y, 4, 4);
  for (double v : orth.values()) EXPECT_NEAR(v, 0.5, 1e-15);
}

TEST(FocalModulator, BlockConstantCroppedOracle) {
  const auto p = grid(4, 3, 3, 5), f = grid(4, 3, 3, 6);
  const PixelMask s = afat::focal_modulator(p, f, 10, 11);
  ASSERT_EQ(s.height(), 10);
  ASSERT_EQ(s.width(), 11);
  EXPECT_LT(max_abs_diff(s.values(), oracle::focal_modulator(p.features(), f.features(), 4, 10, 11)), 1e-12);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 11; ++x) EXPECT_EQ(s.at(y, x), s.at((y / 4) * 4, (x / 4) * 4));
  EXPECT_THROW(afat::focal_modulator(p, f, 13, 4), ContractViolation);
}

TEST(FocalMse, GammaZeroIsMse) {
  const Frame a(random_grid(3, 6, 6, 1)), b(random_grid(3, 6, 6, 2));
  const PixelMask s(6, 6, random_values(36, 3), MaskKind::kSoft);
  double mse = 0.0;
  for (std::size_t i = 0; i < a.pixels().size(); ++i) mse += std::pow(a.pixels().vec()[i] - b.pixels().vec()[i], 2);
  mse /= static_cast<double>(a.pixels().size());
  EXPECT_NEAR(afat::focal_mse(a, b, s, 0.0), mse, 1e-15);
  EXPECT_EQ(afat::focal_mse(a, b, PixelMask(6, 6, 0.0, MaskKind::kSoft), 2.0), 0.0);
  EXPECT_NEAR(afat::focal_mse(a, b, PixelMask(6, 6, 0.5, MaskKind::kSoft), 2.0), 0.25 * mse, 1e-15);
  EXPECT_THROW(afat::focal_mse(a, b, s, -1.0), ContractViolation);
}

TEST(FocalMse, OracleAndMonotoneInS) {
  const Grid a = random_grid(3, 5, 5, 4), b = random_grid(3, 5, 5, 5);
  auto sv = random_values(25, 6);
  const double base = afat::focal_mse(Frame(a), Frame(b), PixelMask(5, 5, sv, MaskKind::kSoft), 1.5);
  EXPECT_NEAR(base, oracle::focal_mse(a, b, sv, 1.5), 1e-15);
  for (std::size_t i = 0; i < sv.size(); ++i) {
    auto bumped = sv;
    bumped[i] = std::min(1.0, bumped[i] + 0.1);
    EXPECT_GE(afat::focal_mse(Frame(a), Frame(b), PixelMask(5, 5, bumped, MaskKind::kSoft), 1.5), base);
  }
}

TEST(FocalMse, GradientCheckAndDetachedModulator) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto pred = random_param({3, 4, 4}, seed, 0, 1);
    const auto target = ag::Tensor::from_grid(random_grid(3, 4, 4, seed + 1));
    const PixelMask s(4, 4, random_values(16, seed + 2), MaskKind::kSoft);
    EXPECT_LT(gradcheck([&](auto& l) { return afat::focal_mse(l[0], target, s, 2.0); }, {pred}), 1e-4);
  }
}

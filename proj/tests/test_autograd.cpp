// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "osdvsr/autograd/ops.hpp"
#include "support.hpp"

using namespace osdvsr;
using namespace osdvsr::testing;
namespace A = osdvsr::ag;

namespace {

constexpr double kTol = 1e-4;

// Reduces any tensor to a scalar with fixed, non-uniform weights so every
// output element contributes a distinct amount.
A::Tensor weighted_sum(const A::Tensor& t) {
  std::vector<double> w(t.numel());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.5 + 0.37 * static_cast<double>(i % 7) - 0.11 * (i % 3);
  return A::sum(A::mul(t, A::Tensor::constant(t.shape(), w)));
}

}  // namespace

TEST(Autograd, ElementwiseOps) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto a = random_param({3, 4}, seed), b = random_param({3, 4}, seed + 100, 0.5, 2.0);
    EXPECT_LT(gradcheck([](auto& l) { return weighted_sum(A::mul(A::add(l[0], l[1]), A::sub(l[0], l[1]))); }, {a, b}),
              kTol);
    EXPECT_LT(gradcheck([](auto& l) { return weighted_sum(A::log(l[1])); }, {a, b}), kTol);
    EXPECT_LT(gradcheck([](auto& l) { return weighted_sum(A::exp(A::scale(l[0], 0.7))); }, {a}), kTol);
    EXPECT_LT(gradcheck([](auto& l) { return weighted_sum(A::softplus(l[0])); }, {a}), kTol);
    EXPECT_LT(gradcheck([](auto& l) { return weighted_sum(A::silu(A::square(l[0]))); }, {a}), kTol);
    EXPECT_LT(gradcheck([](auto& l) { return A::mean(A::add_scalar(l[0], 3.0)); }, {a}), kTol);
  }
}

TEST(Autograd, MatmulSoftmaxTranspose) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto a = random_param({3, 4}, seed), b = random_param({4, 2}, seed + 1);
    EXPECT_LT(gradcheck([](auto& l) { return weighted_sum(A::softmax_rows(A::matmul(l[0], l[1]))); }, {a, b}), kTol);
    EXPECT_LT(gradcheck([](auto& l) { return weighted_sum(A::transpose(l[0])); }, {a}), kTol);
  }
}

TEST(Autograd, ConvolutionAndResampling) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto x = random_param({2, 6, 6}, seed), w = random_param({3, 2, 3, 3}, seed + 1), b = random_param({3}, seed + 2);
    for (int stride : {1, 2}) {
      EXPECT_LT(gradcheck([stride](auto& l) { return weighted_sum(A::conv2d(l[0], l[1], l[2], stride, 1)); }, {x, w, b}),
                kTol);
    }
    EXPECT_LT(gradcheck([](auto& l) { return weighted_sum(A::upsample_nearest(l[0], 2)); }, {x}), kTol);
    auto y = random_param({1, 6, 6}, seed + 3);
    EXPECT_LT(gradcheck([](auto& l) { return weighted_sum(A::concat_channels(l[0], l[1])); }, {x, y}), kTol);
    EXPECT_LT(gradcheck([](auto& l) { return weighted_sum(A::mul_plane(l[0], l[1])); }, {x, y}), kTol);
    auto bias = random_param({2}, seed + 4);
    EXPECT_LT(gradcheck([](auto& l) { return weighted_sum(A::add_channel_bias(l[0], l[1])); }, {x, bias}), kTol);
    EXPECT_LT(gradcheck([](auto& l) { return weighted_sum(A::mean_channels(l[0])); }, {x}), kTol);
  }
}

TEST(Autograd, CosineAndNormalize) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto a = random_param({4, 2, 3}, seed), b = random_param({4, 2, 3}, seed + 9);
    EXPECT_LT(gradcheck([](auto& l) { return weighted_sum(A::cosine_similarity_channels(l[0], l[1])); }, {a, b}), kTol);
    EXPECT_LT(gradcheck([](auto& l) { return weighted_sum(A::normalize_channels(l[0])); }, {a}), kTol);
  }
}

TEST(Autograd, CosineZeroNormThrows) {
  const auto a = A::Tensor::constant({2, 1, 1}, {0.0, 0.0});
  const auto b = A::Tensor::constant({2, 1, 1}, {1.0, 0.0});
  EXPECT_THROW(A::cosine_similarity_channels(a, b), ContractViolation);
}

TEST(Autograd, ConvMatchesDirectLoop) {
  const auto x = A::Tensor::from_grid(random_grid(2, 5, 5, 1, -1.0, 1.0));
  const auto w = random_param({1, 2, 3, 3}, 2);
  const auto out = A::conv2d(x, w, {}, 1, 1);
  for (int y = 0; y < 5; ++y)
    for (int xx = 0; xx < 5; ++xx) {
      double s = 0.0;
      for (int c = 0; c < 2; ++c)
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) {
            const int sy = y + i - 1, sx = xx + j - 1;
            if (sy < 0 || sx < 0 || sy >= 5 || sx >= 5) continue;
            s += w.values()[((c * 3) + i) * 3 + j] * x.values()[(c * 5 + sy) * 5 + sx];
          }
      EXPECT_NEAR(out.values()[y * 5 + xx], s, 1e-12);
    }
}

TEST(Autograd, DetachStopsGradient) {
  auto a = random_param({3}, 1);
  const auto loss = A::sum(A::mul(a.detach(), a));
  loss.backward();
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(a.grad()[i], a.values()[i], 1e-15);
}

TEST(Autograd, GradientsAccumulateUntilZeroed) {
  auto a = random_param({2}, 3);
  A::sum(a).backward();
  A::sum(a).backward();
  EXPECT_EQ(a.grad()[0], 2.0);
  a.zero_grad();
  EXPECT_EQ(a.grad()[0], 0.0);
}

TEST(Autograd, BackwardRequiresScalar) {
  auto a = random_param({2}, 4);
  EXPECT_THROW(a.backward(), ContractViolation);
}

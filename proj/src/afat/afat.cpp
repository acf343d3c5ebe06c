// SPDX-License-Identifier: Apache-2.0

#include "osdvsr/afat/afat.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "osdvsr/autograd/ops.hpp"

namespace osdvsr::afat {

namespace {

void require_same_grid(const PatchFeatureGrid& a, const PatchFeatureGrid& b, const char* op) {
  require(a.features().same_shape(b.features()), std::string(op) + ": feature grids differ in shape");
}

ag::Tensor weight_tensor(const PixelMask& s, double gamma) {
  std::vector<double> w(s.values().size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = gamma == 0.0 ? 1.0 : std::pow(s.values()[i], gamma);
  return ag::Tensor::constant({s.height(), s.width()}, std::move(w));
}

}  // namespace

PatchFeatureGrid::PatchFeatureGrid(Grid features, int patch_size)
    : features_(std::move(features)), patch_size_(patch_size) {
  require(patch_size >= 1, "PatchFeatureGrid: patch_size must be >= 1");
  require(features_.all_finite(), "PatchFeatureGrid: non-finite feature");
}

void AfatParams::validate() const {
  require(tau > 0.0, "AfatParams: tau must be > 0");
  require(gamma >= 0.0, "AfatParams: gamma must be >= 0");
}

Grid patch_cosine_grid(const PatchFeatureGrid& a, const PatchFeatureGrid& b) {
  require_same_grid(a, b, "patch_cosine_grid");
  return ag::cosine_similarity_channels(a.tensor(), b.tensor()).to_grid();
}

ag::Tensor discriminator_loss(const ag::Tensor& prev_real, const ag::Tensor& curr_real, const ag::Tensor& curr_fake,
                              double tau) {
  require(tau > 0.0, "discriminator_loss: tau must be > 0");
  const ag::Tensor real_sim = ag::cosine_similarity_channels(prev_real, curr_real);
  const ag::Tensor fake_sim = ag::cosine_similarity_channels(prev_real, curr_fake);
  // -log(e^{r/tau} / (e^{r/tau} + e^{f/tau})) = softplus((f - r) / tau)
  return ag::mean(ag::softplus(ag::scale(ag::sub(fake_sim, real_sim), 1.0 / tau)));
}

double discriminator_loss(const PatchFeatureGrid& prev_real, const PatchFeatureGrid& curr_real,
                          const PatchFeatureGrid& curr_fake, double tau) {
  require_same_grid(prev_real, curr_real, "discriminator_loss");
  require_same_grid(prev_real, curr_fake, "discriminator_loss");
  return discriminator_loss(prev_real.tensor(), curr_real.tensor(), curr_fake.tensor(), tau).item();
}

ag::Tensor generator_adv_loss(const ag::Tensor& prev_real, const ag::Tensor& curr_fake) {
  return ag::scale(ag::mean(ag::cosine_similarity_channels(prev_real, curr_fake)), -1.0);
}

double generator_adv_loss(const PatchFeatureGrid& prev_real, const PatchFeatureGrid& curr_fake) {
  require_same_grid(prev_real, curr_fake, "generator_adv_loss");
  return generator_adv_loss(prev_real.tensor(), curr_fake.tensor()).item();
}

PixelMask focal_modulator(const PatchFeatureGrid& prev_real, const PatchFeatureGrid& curr_fake, int height,
                          int width) {
  require_same_grid(prev_real, curr_fake, "focal_modulator");
  const int n = prev_real.patch_size();
  require(height > 0 && width > 0, "focal_modulator: output size must be positive");
  require(prev_real.rows() * n >= height && prev_real.cols() * n >= width,
          "focal_modulator: patch grid does not cover the requested size");
  const Grid cos = patch_cosine_grid(prev_real, curr_fake);
  std::vector<double> values(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double s = (1.0 - cos.at(0, y / n, x / n)) / 2.0;
      values[static_cast<std::size_t>(y) * width + x] = std::clamp(s, 0.0, 1.0);
    }
  }
  return PixelMask(height, width, std::move(values), MaskKind::kSoft);
}

ag::Tensor focal_mse(const ag::Tensor& pred, const ag::Tensor& target, const PixelMask& s, double gamma) {
  require(gamma >= 0.0, "focal_mse: gamma must be >= 0");
  require(pred.shape() == target.shape() && pred.shape().size() == 3, "focal_mse: pred/target shape mismatch");
  require(s.height() == pred.dim(1) && s.width() == pred.dim(2), "focal_mse: modulator shape mismatch");
  const ag::Tensor per_pixel = ag::mean_channels(ag::square(ag::sub(pred, target)));
  return ag::mean(ag::mul(per_pixel, weight_tensor(s, gamma)));
}

double focal_mse(const Frame& pred, const Frame& target, const PixelMask& s, double gamma) {
  require(pred.pixels().same_shape(target.pixels()), "focal_mse: pred/target shape mismatch");
  return focal_mse(ag::Tensor::from_grid(pred.pixels()), ag::Tensor::from_grid(target.pixels()), s, gamma).item();
}

}  // namespace osdvsr::afat

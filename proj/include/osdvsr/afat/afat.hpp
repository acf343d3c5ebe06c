// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "osdvsr/autograd/tensor.hpp"
#include "osdvsr/core/types.hpp"

namespace osdvsr::afat {

/// Patch embeddings from the discriminator: features is (D, P, Q); each
/// cell covers a patch_size x patch_size pixel block.
class PatchFeatureGrid {
 public:
  PatchFeatureGrid() = default;
  PatchFeatureGrid(Grid features, int patch_size);

  [[nodiscard]] const Grid& features() const { return features_; }
  [[nodiscard]] int patch_size() const { return patch_size_; }
  [[nodiscard]] int rows() const { return features_.height(); }
  [[nodiscard]] int cols() const { return features_.width(); }
  [[nodiscard]] int dim() const { return features_.channels(); }
  [[nodiscard]] ag::Tensor tensor() const { return ag::Tensor::from_grid(features_); }

 private:
  Grid features_;
  int patch_size_ = 1;
};

struct AfatParams {
  double tau = 100.0;
  double gamma = 1.0;

  void validate() const;
};

/// Per-patch cosine similarity, (P, Q) in [-1, 1].
Grid patch_cosine_grid(const PatchFeatureGrid& a, const PatchFeatureGrid& b);

/// Patch-level contrastive critic loss. For each patch the real pair
/// (prev real, curr real) competes with the fake pair (prev real, curr fake)
/// in a two-way softmax over similarity / tau; the loss is the mean negative
/// log-probability of the real pair.
double discriminator_loss(const PatchFeatureGrid& prev_real, const PatchFeatureGrid& curr_real,
                          const PatchFeatureGrid& curr_fake, double tau);
ag::Tensor discriminator_loss(const ag::Tensor& prev_real, const ag::Tensor& curr_real, const ag::Tensor& curr_fake,
                              double tau);

/// Negative mean patch cosine between previous real and current fake.
double generator_adv_loss(const PatchFeatureGrid& prev_real, const PatchFeatureGrid& curr_fake);
ag::Tensor generator_adv_loss(const ag::Tensor& prev_real, const ag::Tensor& curr_fake);

/// (1 - cos) / 2 per patch, nearest-upsampled by patch_size and cropped to
/// (height, width).
PixelMask focal_modulator(const PatchFeatureGrid& prev_real, const PatchFeatureGrid& curr_fake, int height,
                          int width);

/// mean over pixels of s^gamma * (channel-mean squared error). The
/// modulator is a fixed weight (no gradient flows into s).
double focal_mse(const Frame& pred, const Frame& target, const PixelMask& s, double gamma);
ag::Tensor focal_mse(const ag::Tensor& pred, const ag::Tensor& target, const PixelMask& s, double gamma);

}  // namespace osdvsr::afat

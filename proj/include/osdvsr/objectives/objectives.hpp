// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "osdvsr/autograd/tensor.hpp"
#include "osdvsr/core/types.hpp"

namespace osdvsr::objectives {

/// Weights of the adversarial, focal-MSE, perceptual and warp terms.
struct LossWeights {
  double gan = 1.0;
  double fmse = 1.0;
  double lpips = 2.0;
  double warp = 2.0;

  void validate() const;
};

struct LossComponents {
  double gan = 0.0;
  double fmse = 0.0;
  double lpips = 0.0;
  double warp = 0.0;
};

/// Deep-feature extractor for the perceptual distance. Implementations must
/// be deterministic and return at least one (C, H, W) map per image.
class PerceptualFeatureExtractor {
 public:
  virtual ~PerceptualFeatureExtractor() = default;
  [[nodiscard]] virtual std::vector<ag::Tensor> features(const ag::Tensor& image) const = 0;
  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual int layer_count() const = 0;
};

/// Three frozen random 3x3 conv layers (strides 1, 2, 2; SiLU), He-normal
/// weights drawn from `seed`.
class ToyPerceptualExtractor final : public PerceptualFeatureExtractor {
 public:
  explicit ToyPerceptualExtractor(int in_channels = 3, std::uint64_t seed = 7);

  [[nodiscard]] std::vector<ag::Tensor> features(const ag::Tensor& image) const override;
  [[nodiscard]] std::string name() const override { return "toy_conv_pyramid"; }
  [[nodiscard]] int layer_count() const override { return static_cast<int>(weights_.size()); }

 private:
  std::vector<ag::Tensor> weights_;
  std::vector<ag::Tensor> biases_;
  std::vector<int> strides_;
};

/// Confidence-weighted squared error between the prediction and the
/// previous ground-truth frame warped onto the current one. The confidence
/// exp(-alpha * |gt_curr - warped|_1) comes from ground truth only and is a
/// constant for the generator.
double warp_loss(const Frame& pred_curr, const Frame& gt_prev, const Frame& gt_curr, const FlowField& flow_hr,
                 double alpha);
ag::Tensor warp_loss(const ag::Tensor& pred_curr, const Frame& gt_prev, const Frame& gt_curr,
                     const FlowField& flow_hr, double alpha);

/// Layer-averaged mean squared distance of channel-normalized features.
double perceptual_loss(const Frame& pred, const Frame& target, const PerceptualFeatureExtractor& extractor);
ag::Tensor perceptual_loss(const ag::Tensor& pred, const ag::Tensor& target,
                           const PerceptualFeatureExtractor& extractor);

/// Weighted sum of the four terms. Throws PoisonedLossError (with the
/// offending values in the message) on any non-finite component.
double total_loss(const LossComponents& components, const LossWeights& weights);

struct LossTerms {
  ag::Tensor gan;
  ag::Tensor fmse;
  ag::Tensor lpips;
  ag::Tensor warp;
};

/// Graph version; undefined terms are skipped.
ag::Tensor total_loss(const LossTerms& terms, const LossWeights& weights);

void check_finite(const LossComponents& components, const std::string& context);

}  // namespace osdvsr::objectives

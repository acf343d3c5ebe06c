// SPDX-License-Identifier: Apache-2.0

#include "osdvsr/objectives/objectives.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "osdvsr/autograd/ops.hpp"
#include "osdvsr/core/geometry.hpp"

namespace osdvsr::objectives {

void LossWeights::validate() const {
  for (double w : {gan, fmse, lpips, warp}) require(std::isfinite(w) && w >= 0.0, "LossWeights: weights must be >= 0");
}

ToyPerceptualExtractor::ToyPerceptualExtractor(int in_channels, std::uint64_t seed) {
  require(in_channels == 1 || in_channels == 3, "ToyPerceptualExtractor: in_channels must be 1 or 3");
  std::mt19937_64 rng(seed);
  const int widths[] = {8, 16, 16};
  const int strides[] = {1, 2, 2};
  int c_in = in_channels;
  for (int l = 0; l < 3; ++l) {
    const int c_out = widths[l];
    const int fan_in = c_in * 9;
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
    std::vector<double> w(static_cast<std::size_t>(c_out) * fan_in);
    for (double& v : w) v = normal(rng);
    std::uniform_real_distribution<double> bias(-0.1, 0.1);
    std::vector<double> b(static_cast<std::size_t>(c_out));
    for (double& v : b) v = bias(rng);
    weights_.push_back(ag::Tensor::constant({c_out, c_in, 3, 3}, std::move(w)));
    biases_.push_back(ag::Tensor::constant({c_out}, std::move(b)));
    strides_.push_back(strides[l]);
    c_in = c_out;
  }
}

std::vector<ag::Tensor> ToyPerceptualExtractor::features(const ag::Tensor& image) const {
  std::vector<ag::Tensor> out;
  // Shift [0,1] pixels to zero mean so the first layer sees signed input.
  ag::Tensor h = ag::add_scalar(image, -0.5);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = ag::silu(ag::conv2d(h, weights_[l], biases_[l], strides_[l], 1));
    out.push_back(h);
  }
  return out;
}

ag::Tensor warp_loss(const ag::Tensor& pred_curr, const Frame& gt_prev, const Frame& gt_curr,
                     const FlowField& flow_hr, double alpha) {
  require(alpha >= 0.0, "warp_loss: alpha must be >= 0");
  require(gt_prev.pixels().same_shape(gt_curr.pixels()), "warp_loss: ground-truth frames differ in shape");
  require(pred_curr.shape() == ag::Shape({gt_curr.channels(), gt_curr.height(), gt_curr.width()}),
          "warp_loss: prediction shape differs from ground truth");
  const Grid warped = warp(gt_prev.pixels(), flow_hr);
  const int h = gt_curr.height();
  const int w = gt_curr.width();
  std::vector<double> confidence(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double l1 = 0.0;
      for (int c = 0; c < gt_curr.channels(); ++c) l1 += std::abs(gt_curr.pixels().at(c, y, x) - warped.at(c, y, x));
      confidence[static_cast<std::size_t>(y) * w + x] = std::exp(-alpha * l1);
    }
  }
  const ag::Tensor per_pixel = ag::mean_channels(ag::square(ag::sub(pred_curr, ag::Tensor::from_grid(warped))));
  return ag::mean(ag::mul(per_pixel, ag::Tensor::constant({h, w}, std::move(confidence))));
}

double warp_loss(const Frame& pred_curr, const Frame& gt_prev, const Frame& gt_curr, const FlowField& flow_hr,
                 double alpha) {
  require(pred_curr.pixels().same_shape(gt_curr.pixels()), "warp_loss: prediction shape differs from ground truth");
  return warp_loss(ag::Tensor::from_grid(pred_curr.pixels()), gt_prev, gt_curr, flow_hr, alpha).item();
}

ag::Tensor perceptual_loss(const ag::Tensor& pred, const ag::Tensor& target,
                           const PerceptualFeatureExtractor& extractor) {
  require(pred.shape() == target.shape(), "perceptual_loss: shape mismatch");
  const auto fp = extractor.features(pred);
  const auto ft = extractor.features(target);
  require(!fp.empty() && fp.size() == ft.size(), "perceptual_loss: extractor returned no features");
  ag::Tensor acc;
  for (std::size_t l = 0; l < fp.size(); ++l) {
    ag::Tensor d = ag::mean(ag::square(ag::sub(ag::normalize_channels(fp[l]), ag::normalize_channels(ft[l]))));
    acc = acc.defined() ? ag::add(acc, d) : d;
  }
  return ag::scale(acc, 1.0 / static_cast<double>(fp.size()));
}

double perceptual_loss(const Frame& pred, const Frame& target, const PerceptualFeatureExtractor& extractor) {
  require(pred.pixels().same_shape(target.pixels()), "perceptual_loss: shape mismatch");
  return perceptual_loss(ag::Tensor::from_grid(pred.pixels()), ag::Tensor::from_grid(target.pixels()), extractor)
      .item();
}

void check_finite(const LossComponents& c, const std::string& context) {
  if (std::isfinite(c.gan) && std::isfinite(c.fmse) && std::isfinite(c.lpips) && std::isfinite(c.warp)) return;
  std::ostringstream os;
  os << "non-finite loss" << (context.empty() ? "" : " (" + context + ")") << ": gan=" << c.gan << " fmse=" << c.fmse
     << " lpips=" << c.lpips << " warp=" << c.warp;
  throw PoisonedLossError(os.str());
}

double total_loss(const LossComponents& components, const LossWeights& weights) {
  weights.validate();
  check_finite(components, "");
  return weights.gan * components.gan + weights.fmse * components.fmse + weights.lpips * components.lpips +
         weights.warp * components.warp;
}

ag::Tensor total_loss(const LossTerms& terms, const LossWeights& weights) {
  weights.validate();
  LossComponents values;
  ag::Tensor acc;
  auto add_term = [&acc](const ag::Tensor& t, double w, double& slot) {
    if (!t.defined()) return;
    slot = t.item();
    const ag::Tensor weighted = ag::scale(t, w);
    acc = acc.defined() ? ag::add(acc, weighted) : weighted;
  };
  add_term(terms.gan, weights.gan, values.gan);
  add_term(terms.fmse, weights.fmse, values.fmse);
  add_term(terms.lpips, weights.lpips, values.lpips);
  add_term(terms.warp, weights.warp, values.warp);
  check_finite(values, "");
  return acc.defined() ? acc : ag::Tensor::scalar(0.0);
}

}  // namespace osdvsr::objectives

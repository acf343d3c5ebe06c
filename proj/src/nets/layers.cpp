// SPDX-License-Identifier: Apache-2.0

#include "osdvsr/nets/layers.hpp"

#include <cmath>

#include "osdvsr/autograd/ops.hpp"

namespace osdvsr::nets {

void set_trainable(const ParameterList& params, bool trainable) {
  for (const auto& p : params) {
    ag::Tensor t = p.tensor;
    t.set_requires_grad(trainable);
  }
}

void zero_grads(const ParameterList& params) {
  for (const auto& p : params) {
    ag::Tensor t = p.tensor;
    t.zero_grad();
  }
}

std::vector<double> he_normal(std::size_t count, int fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
  std::vector<double> out(count);
  for (double& v : out) v = normal(rng);
  return out;
}

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, std::mt19937_64& rng)
    : kernel_(kernel), stride_(stride) {
  require(in_channels > 0 && out_channels > 0 && kernel > 0 && kernel % 2 == 1 && stride > 0,
          "Conv2d: invalid geometry");
  const int fan_in = in_channels * kernel * kernel;
  weight_ = ag::Tensor::parameter({out_channels, in_channels, kernel, kernel},
                                  he_normal(static_cast<std::size_t>(out_channels) * fan_in, fan_in, rng));
  bias_ = ag::Tensor::parameter({out_channels}, std::vector<double>(static_cast<std::size_t>(out_channels), 0.0));
}

ag::Tensor Conv2d::forward(const ag::Tensor& x) const { return ag::conv2d(x, weight_, bias_, stride_, kernel_ / 2); }

void Conv2d::collect(ParameterList& out, const std::string& prefix, const std::string& group) const {
  out.push_back({prefix + ".weight", group, weight_});
  out.push_back({prefix + ".bias", group, bias_});
}

LoraLinear::LoraLinear(int in_features, int out_features, int rank, std::mt19937_64& rng)
    : in_(in_features), out_(out_features), rank_(rank) {
  require(in_features > 0 && out_features > 0 && rank > 0, "LoraLinear: invalid geometry");
  weight_ = ag::Tensor::parameter({out_features, in_features},
                                  he_normal(static_cast<std::size_t>(out_features) * in_features, in_features, rng));
  bias_ = ag::Tensor::parameter({out_features}, std::vector<double>(static_cast<std::size_t>(out_features), 0.0));
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(in_features)));
  std::vector<double> a(static_cast<std::size_t>(rank) * in_features);
  for (double& v : a) v = normal(rng);
  a_ = ag::Tensor::parameter({rank, in_features}, std::move(a));
  b_ = ag::Tensor::parameter({out_features, rank}, std::vector<double>(static_cast<std::size_t>(out_features) * rank, 0.0));
}

ag::Tensor LoraLinear::effective_weight() const { return ag::add(weight_, ag::matmul(b_, a_)); }

std::vector<double> LoraLinear::delta() const {
  const auto d = ag::matmul(b_.detach(), a_.detach());
  return {d.values().begin(), d.values().end()};
}

ag::Tensor LoraLinear::forward_columns(const ag::Tensor& x) const {
  require(x.shape().size() == 2 && x.dim(0) == in_, "LoraLinear: input must be (in, n)");
  const int n = x.dim(1);
  ag::Tensor y = ag::matmul(effective_weight(), x);
  // bias broadcast over columns: treat (out, n) as (out, 1, n)
  return ag::reshape(ag::add_channel_bias(ag::reshape(y, {out_, 1, n}), bias_), {out_, n});
}

ag::Tensor LoraLinear::forward_map(const ag::Tensor& x) const {
  require(x.shape().size() == 3 && x.dim(0) == in_, "LoraLinear: input must be (in, H, W)");
  const int h = x.dim(1);
  const int w = x.dim(2);
  const ag::Tensor y = forward_columns(ag::reshape(x, {in_, h * w}));
  return ag::reshape(y, {out_, h, w});
}

void LoraLinear::collect(ParameterList& out, const std::string& prefix, const std::string& base_group,
                         const std::string& lora_group) const {
  out.push_back({prefix + ".weight", base_group, weight_});
  out.push_back({prefix + ".bias", base_group, bias_});
  out.push_back({prefix + ".lora_a", lora_group, a_});
  out.push_back({prefix + ".lora_b", lora_group, b_});
}

Linear::Linear(int in_features, int out_features, std::mt19937_64& rng) {
  weight_ = ag::Tensor::parameter({out_features, in_features},
                                  he_normal(static_cast<std::size_t>(out_features) * in_features, in_features, rng));
  bias_ = ag::Tensor::parameter({out_features}, std::vector<double>(static_cast<std::size_t>(out_features), 0.0));
}

ag::Tensor Linear::forward(const ag::Tensor& x) const {
  const int in = weight_.dim(1);
  const int out = weight_.dim(0);
  require(static_cast<int>(x.numel()) == in, "Linear: input size mismatch");
  const ag::Tensor y = ag::matmul(weight_, ag::reshape(x, {in, 1}));
  return ag::add(ag::reshape(y, {out}), bias_);
}

void Linear::collect(ParameterList& out, const std::string& prefix, const std::string& group) const {
  out.push_back({prefix + ".weight", group, weight_});
  out.push_back({prefix + ".bias", group, bias_});
}

}  // namespace osdvsr::nets

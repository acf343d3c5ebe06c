// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <string>
#include <vector>

#include "osdvsr/autograd/tensor.hpp"

namespace osdvsr::nets {

/// A parameter tensor with a stable dotted name and a hashing group.
struct NamedParameter {
  std::string name;
  std::string group;
  ag::Tensor tensor;
};

using ParameterList = std::vector<NamedParameter>;

void set_trainable(const ParameterList& params, bool trainable);
void zero_grads(const ParameterList& params);

/// He-normal weight for fan_in inputs.
std::vector<double> he_normal(std::size_t count, int fan_in, std::mt19937_64& rng);

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel, int stride, std::mt19937_64& rng);

  [[nodiscard]] ag::Tensor forward(const ag::Tensor& x) const;
  void collect(ParameterList& out, const std::string& prefix, const std::string& group) const;

  [[nodiscard]] const ag::Tensor& weight() const { return weight_; }
  [[nodiscard]] const ag::Tensor& bias() const { return bias_; }
  [[nodiscard]] int stride() const { return stride_; }
  [[nodiscard]] int padding() const { return kernel_ / 2; }

 private:
  ag::Tensor weight_;
  ag::Tensor bias_;
  int kernel_ = 1;
  int stride_ = 1;
};

/// y = (W + B A) x + b, with W and b the frozen base and B (out, r), A (r, in)
/// the adapter. B starts at zero so a fresh adapter leaves the base output
/// unchanged.
class LoraLinear {
 public:
  LoraLinear() = default;
  LoraLinear(int in_features, int out_features, int rank, std::mt19937_64& rng);

  /// x: (in, n) columns -> (out, n).
  [[nodiscard]] ag::Tensor forward_columns(const ag::Tensor& x) const;
  /// x: (in, H, W) -> (out, H, W), i.e. a 1x1 convolution.
  [[nodiscard]] ag::Tensor forward_map(const ag::Tensor& x) const;
  [[nodiscard]] ag::Tensor effective_weight() const;
  /// B A as a plain (out, in) row-major matrix.
  [[nodiscard]] std::vector<double> delta() const;

  void collect(ParameterList& out, const std::string& prefix, const std::string& base_group,
               const std::string& lora_group) const;

  [[nodiscard]] int rank() const { return rank_; }
  [[nodiscard]] int in_features() const { return in_; }
  [[nodiscard]] int out_features() const { return out_; }
  [[nodiscard]] const ag::Tensor& lora_a() const { return a_; }
  [[nodiscard]] const ag::Tensor& lora_b() const { return b_; }

 private:
  ag::Tensor weight_;
  ag::Tensor bias_;
  ag::Tensor a_;
  ag::Tensor b_;
  int in_ = 0;
  int out_ = 0;
  int rank_ = 0;
};

/// Plain dense layer on a vector: (in) -> (out).
class Linear {
 public:
  Linear() = default;
  Linear(int in_features, int out_features, std::mt19937_64& rng);

  [[nodiscard]] ag::Tensor forward(const ag::Tensor& x) const;
  void collect(ParameterList& out, const std::string& prefix, const std::string& group) const;

 private:
  ag::Tensor weight_;
  ag::Tensor bias_;
};

}  // namespace osdvsr::nets

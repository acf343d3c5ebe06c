// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "osdvsr/nets/layers.hpp"

namespace osdvsr::harness {

/// Adam with decoupled weight decay.
class AdamW {
 public:
  AdamW() = default;
  AdamW(nets::ParameterList params, double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8);

  void step();
  void zero_grad();
  [[nodiscard]] long long steps_taken() const { return t_; }
  [[nodiscard]] const nets::ParameterList& parameters() const { return params_; }

 private:
  nets::ParameterList params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  double lr_ = 1e-3;
  double wd_ = 0.0;
  double b1_ = 0.9;
  double b2_ = 0.999;
  double eps_ = 1e-8;
  long long t_ = 0;
};

/// Plain SGD whose rate ramps linearly to target_lr: lr(k) = target * k / warmup
/// for iteration k <= warmup (1-based), target afterwards.
class SgdWarmup {
 public:
  SgdWarmup() = default;
  SgdWarmup(nets::ParameterList params, double target_lr, int warmup);

  [[nodiscard]] double lr_at(long long k) const;
  /// Applies iteration (steps_taken() + 1).
  void step();
  void zero_grad();
  [[nodiscard]] long long steps_taken() const { return k_; }

 private:
  nets::ParameterList params_;
  double target_ = 5e-4;
  int warmup_ = 0;
  long long k_ = 0;
};

}  // namespace osdvsr::harness

// SPDX-License-Identifier: Apache-2.0

#include "osdvsr/harness/optim.hpp"

#include <cmath>

namespace osdvsr::harness {

AdamW::AdamW(nets::ParameterList params, double lr, double weight_decay, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {
  require(lr > 0.0 && weight_decay >= 0.0, "AdamW: invalid hyperparameters");
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void AdamW::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ag::Tensor t = params_[i].tensor;
    const auto g = t.grad();
    auto w = t.mutable_values();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g.empty() ? 0.0 : g[j];
      m[j] = b1_ * m[j] + (1.0 - b1_) * gj;
      v[j] = b2_ * v[j] + (1.0 - b2_) * gj * gj;
      w[j] -= lr_ * wd_ * w[j];
      w[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

void AdamW::zero_grad() { nets::zero_grads(params_); }

SgdWarmup::SgdWarmup(nets::ParameterList params, double target_lr, int warmup)
    : params_(std::move(params)), target_(target_lr), warmup_(warmup) {
  require(target_lr > 0.0 && warmup >= 0, "SgdWarmup: invalid hyperparameters");
}

double SgdWarmup::lr_at(long long k) const {
  if (warmup_ == 0 || k >= warmup_) return target_;
  return target_ * static_cast<double>(k) / static_cast<double>(warmup_);
}

void SgdWarmup::step() {
  ++k_;
  const double lr = lr_at(k_);
  for (const auto& p : params_) {
    ag::Tensor t = p.tensor;
    const auto g = t.grad();
    if (g.empty()) continue;
    auto w = t.mutable_values();
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= lr * g[j];
  }
}

void SgdWarmup::zero_grad() { nets::zero_grads(params_); }

}  // namespace osdvsr::harness

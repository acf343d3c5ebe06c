// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "osdvsr/autograd/tensor.hpp"
#include "osdvsr/core/types.hpp"

namespace osdvsr::diffusion {

/// Per-step signal/noise coefficients (alpha_t, beta_t), t = 1..T.
class NoiseSchedule {
 public:
  /// Variance-preserving cosine-style table: alpha_t = cos(phi_t),
  /// beta_t = sin(phi_t), with phi_t = (t / T) * acos(alpha_final). The
  /// endpoint alpha_T equals alpha_final exactly.
  static NoiseSchedule cosine(int total_steps = 1000, double alpha_final = 0.5);

  /// Arbitrary table. Validates lengths and finiteness only; a zero alpha_T is
  /// accepted here and rejected by one_step_denoise.
  static NoiseSchedule from_lists(std::vector<double> alphas, std::vector<double> betas);

  [[nodiscard]] int total_steps() const { return static_cast<int>(alphas_.size()); }
  [[nodiscard]] double alpha(int t) const;
  [[nodiscard]] double beta(int t) const;
  [[nodiscard]] double alpha_final() const { return alphas_.back(); }
  [[nodiscard]] double beta_final() const { return betas_.back(); }
  [[nodiscard]] const std::vector<double>& alphas() const { return alphas_; }
  [[nodiscard]] const std::vector<double>& betas() const { return betas_; }

 private:
  NoiseSchedule(std::vector<double> alphas, std::vector<double> betas);

  std::vector<double> alphas_;
  std::vector<double> betas_;
};

/// z_t = alpha_t * z + beta_t * eps.
LatentGrid add_noise(const LatentGrid& z, int t, const LatentGrid& eps, const NoiseSchedule& sched);
ag::Tensor add_noise(const ag::Tensor& z, int t, const ag::Tensor& eps, const NoiseSchedule& sched);

/// z_hat = (z_noisy - beta_T * eps_pred) / alpha_T, always at the final step.
/// Throws SingularScheduleError when alpha_T == 0.
LatentGrid one_step_denoise(const LatentGrid& z_noisy, const LatentGrid& predicted_eps, const NoiseSchedule& sched);
ag::Tensor one_step_denoise(const ag::Tensor& z_noisy, const ag::Tensor& predicted_eps, const NoiseSchedule& sched);

}  // namespace osdvsr::diffusion

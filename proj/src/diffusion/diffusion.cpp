// SPDX-License-Identifier: Apache-2.0

#include "osdvsr/diffusion/diffusion.hpp"

#include <cmath>
#include <numbers>

#include "osdvsr/autograd/ops.hpp"

namespace osdvsr::diffusion {

NoiseSchedule::NoiseSchedule(std::vector<double> alphas, std::vector<double> betas)
    : alphas_(std::move(alphas)), betas_(std::move(betas)) {
  require(!alphas_.empty(), "NoiseSchedule: empty schedule");
  require(alphas_.size() == betas_.size(), "NoiseSchedule: alphas and betas differ in length");
  for (std::size_t i = 0; i < alphas_.size(); ++i) {
    require(std::isfinite(alphas_[i]) && std::isfinite(betas_[i]), "NoiseSchedule: non-finite entry");
  }
}

NoiseSchedule NoiseSchedule::cosine(int total_steps, double alpha_final) {
  require(total_steps >= 1, "NoiseSchedule::cosine: total_steps must be >= 1");
  require(alpha_final > 0.0 && alpha_final <= 1.0, "NoiseSchedule::cosine: alpha_final must lie in (0,1]");
  const double phi_max = std::acos(alpha_final);
  std::vector<double> alphas(static_cast<std::size_t>(total_steps));
  std::vector<double> betas(static_cast<std::size_t>(total_steps));
  for (int t = 1; t <= total_steps; ++t) {
    const double phi = phi_max * static_cast<double>(t) / total_steps;
    alphas[static_cast<std::size_t>(t - 1)] = std::cos(phi);
    betas[static_cast<std::size_t>(t - 1)] = std::sin(phi);
  }
  // Pin the endpoint so alpha_T is exactly the requested value.
  alphas.back() = alpha_final;
  betas.back() = std::sqrt(1.0 - alpha_final * alpha_final);
  return NoiseSchedule(std::move(alphas), std::move(betas));
}

NoiseSchedule NoiseSchedule::from_lists(std::vector<double> alphas, std::vector<double> betas) {
  return NoiseSchedule(std::move(alphas), std::move(betas));
}

double NoiseSchedule::alpha(int t) const {
  require(t >= 1 && t <= total_steps(), "NoiseSchedule: step out of range");
  return alphas_[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::beta(int t) const {
  require(t >= 1 && t <= total_steps(), "NoiseSchedule: step out of range");
  return betas_[static_cast<std::size_t>(t - 1)];
}

LatentGrid add_noise(const LatentGrid& z, int t, const LatentGrid& eps, const NoiseSchedule& sched) {
  require(z.values().same_shape(eps.values()), "add_noise: eps shape differs from z");
  const double a = sched.alpha(t);
  const double b = sched.beta(t);
  Grid out = z.values();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = a * z.values().data()[i] + b * eps.values().data()[i];
  return LatentGrid(std::move(out), z.source_frame_index());
}

ag::Tensor add_noise(const ag::Tensor& z, int t, const ag::Tensor& eps, const NoiseSchedule& sched) {
  require(z.shape() == eps.shape(), "add_noise: eps shape differs from z");
  return ag::add(ag::scale(z, sched.alpha(t)), ag::scale(eps, sched.beta(t)));
}

namespace {
double checked_alpha_final(const NoiseSchedule& sched) {
  const double a = sched.alpha_final();
  if (a == 0.0) throw SingularScheduleError("one_step_denoise: alpha_T is zero");
  return a;
}
}  // namespace

LatentGrid one_step_denoise(const LatentGrid& z_noisy, const LatentGrid& predicted_eps, const NoiseSchedule& sched) {
  require(z_noisy.values().same_shape(predicted_eps.values()), "one_step_denoise: shape mismatch");
  const double a = checked_alpha_final(sched);
  const double b = sched.beta_final();
  Grid out = z_noisy.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = (z_noisy.values().data()[i] - b * predicted_eps.values().data()[i]) / a;
  }
  return LatentGrid(std::move(out), z_noisy.source_frame_index());
}

ag::Tensor one_step_denoise(const ag::Tensor& z_noisy, const ag::Tensor& predicted_eps, const NoiseSchedule& sched) {
  require(z_noisy.shape() == predicted_eps.shape(), "one_step_denoise: shape mismatch");
  const double a = checked_alpha_final(sched);
  return ag::scale(ag::sub(z_noisy, ag::scale(predicted_eps, sched.beta_final())), 1.0 / a);
}

}  // namespace osdvsr::diffusion

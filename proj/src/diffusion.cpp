// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dps/diffusion.h"

#include <cmath>
#include <string>

#include "dps/errors.h"

namespace dps {

DiffusionSchedule::DiffusionSchedule(double sigma_min, double sigma_max,
                                     double t_final)
    : sigma_min_(sigma_min), sigma_max_(sigma_max), t_final_(t_final) {
  if (!(sigma_min > 0.0) || !(sigma_max > sigma_min))
    throw DomainError("DiffusionSchedule: need 0 < sigma_min < sigma_max");
  if (!(t_final > 0.0))
    throw DomainError("DiffusionSchedule: t_final must be positive");
  log_ratio_ = std::log(sigma_max / sigma_min);
}

void DiffusionSchedule::check_tau(double tau) const {
  if (!(tau >= 0.0 && tau <= t_final_))
    throw DomainError("diffusion time " + std::to_string(tau) +
                      " outside [0, " + std::to_string(t_final_) + "]");
}

// sigma(tau) in closed form; tau is measured in units of t_final so that
// sigma(t_final) = sigma_max.
double DiffusionSchedule::noise_level(double tau) const {
  check_tau(tau);
  return sigma_min_ * std::pow(sigma_max_ / sigma_min_, tau / t_final_);
}

double DiffusionSchedule::diffusion_coefficient(double tau) const {
  // With tau rescaled by t_final, d(sigma^2)/dtau picks up a 1/t_final.
  return noise_level(tau) * std::sqrt(2.0 * log_ratio_ / t_final_);
}

double DiffusionSchedule::perturbation_variance(double tau) const {
  const double s = noise_level(tau);
  return s * s - sigma_min_ * sigma_min_;
}

double DiffusionSchedule::variance_for_sigma(double sigma,
                                             TweedieMode mode) const {
  if (!(sigma >= 0.0)) throw DomainError("noise level must be nonnegative");
  if (mode == TweedieMode::kPaper) return sigma * sigma;
  return sigma * sigma - sigma_min_ * sigma_min_;
}

double tweedie_factor(const DiffusionSchedule& sched, double tau,
                      TweedieMode mode) {
  if (mode == TweedieMode::kPaper) {
    const double s = sched.noise_level(tau);
    return s * s;
  }
  return sched.perturbation_variance(tau);
}

void add_complex_noise(Spectrogram& x, double variance, std::mt19937_64& rng) {
  if (variance <= 0.0) return;
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5 * variance));
  for (auto& z : x.data()) {
    const double re = normal(rng);
    const double im = normal(rng);
    z += Complex(re, im);
  }
}

Spectrogram perturb_sample(const DiffusionSchedule& sched,
                           const Spectrogram& x0, double tau,
                           std::mt19937_64& rng) {
  Spectrogram out = x0;
  add_complex_noise(out, sched.perturbation_variance(tau), rng);
  return out;
}

Spectrogram tweedie_denoise(const DiffusionSchedule& sched,
                            const Spectrogram& x, double tau,
                            const Spectrogram& score, TweedieMode mode) {
  x.require_same_shape(score, "tweedie_denoise");
  Spectrogram out = x;
  out.axpy(tweedie_factor(sched, tau, mode), score);
  return out;
}

}  // namespace dps

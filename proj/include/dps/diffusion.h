// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DPS_DIFFUSION_H_
#define DPS_DIFFUSION_H_

#include <random>

#include "dps/stft.h"

namespace dps {

// Which variance the Tweedie denoiser multiplies the score with.
//   kPaper: sigma(tau)^2
//   kExact: sigma(tau)^2 - sigma_min^2, the variance the forward process
//           actually accumulated
enum class TweedieMode { kPaper, kExact };

// Variance-exploding schedule
//   sigma(tau) = sigma_min * (sigma_max / sigma_min)^tau
//   g(tau)     = sigma(tau) * sqrt(2 ln(sigma_max / sigma_min))
// on diffusion time tau in [0, t_final].
class DiffusionSchedule {
 public:
  DiffusionSchedule(double sigma_min = 0.05, double sigma_max = 0.5,
                    double t_final = 1.0);

  double sigma_min() const { return sigma_min_; }
  double sigma_max() const { return sigma_max_; }
  double t_final() const { return t_final_; }

  double diffusion_coefficient(double tau) const;
  double noise_level(double tau) const;
  // Integral of g^2 from 0 to tau, i.e. sigma(tau)^2 - sigma_min^2.
  double perturbation_variance(double tau) const;

  // Variance that pairs with a given conditioning level sigma (see
  // TweedieMode). Used by analytic score providers, which only see sigma.
  double variance_for_sigma(double sigma, TweedieMode mode) const;

 private:
  void check_tau(double tau) const;

  double sigma_min_;
  double sigma_max_;
  double t_final_;
  double log_ratio_;
};

// Draws x0 + sqrt(v(tau)) * Z with Z circular complex normal of unit total
// variance per bin (1/2 in each of the real and imaginary parts).
Spectrogram perturb_sample(const DiffusionSchedule& sched,
                           const Spectrogram& x0, double tau,
                           std::mt19937_64& rng);

// Adds circular complex noise of total per-bin variance `variance` in place.
void add_complex_noise(Spectrogram& x, double variance, std::mt19937_64& rng);

// E[X0 | X_tau] = X_tau + c * score with c = sigma^2 (kPaper) or v (kExact).
Spectrogram tweedie_denoise(const DiffusionSchedule& sched,
                            const Spectrogram& x, double tau,
                            const Spectrogram& score, TweedieMode mode);

// The multiplier c used by tweedie_denoise.
double tweedie_factor(const DiffusionSchedule& sched, double tau,
                      TweedieMode mode);

}  // namespace dps

#endif  // DPS_DIFFUSION_H_

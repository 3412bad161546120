// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DPS_SAMPLER_H_
#define DPS_SAMPLER_H_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dps/diffusion.h"
#include "dps/operators.h"
#include "dps/score.h"

namespace dps {

enum class LikelihoodVariant { kDps, kStateDps };
enum class InitMode { kUnitGaussian, kSigmaTGaussian };

const char* to_string(LikelihoodVariant v);
const char* to_string(JacobianMode j);
const char* to_string(InitMode i);
const char* to_string(TweedieMode m);
LikelihoodVariant parse_variant(const std::string& s);
JacobianMode parse_jacobian(const std::string& s);
InitMode parse_init(const std::string& s);
TweedieMode parse_tweedie(const std::string& s);

struct SamplerConfig {
  int n_steps = 50;
  double corrector_snr = 0.4;
  int corrector_steps = 1;
  LikelihoodVariant variant = LikelihoodVariant::kDps;
  double zeta_peak = 2500.0;
  double zeta_breakpoint = 0.9;
  JacobianMode jacobian = JacobianMode::kIdentity;
  InitMode init = InitMode::kUnitGaussian;
  std::uint64_t seed = 0;
  TweedieMode tweedie_mode = TweedieMode::kPaper;
  DiffusionSchedule schedule{0.05, 0.5, 1.0};
  // Scale y to unit peak and k to unit peak before sampling; the output
  // waveform is mapped back to the input scale.
  bool normalize = true;

  void validate() const;
  double step() const { return -schedule.t_final() / n_steps; }
};

// Saw-tooth weight: peak * tau / breakpoint up to the breakpoint, then
// linearly back to zero at tau = 1.
double zeta_prime(double tau, double peak, double breakpoint);

// Langevin correction at level sigma(tau):
//   X + 2 r^2 sigma^2 s(X, sigma) + 2 r sigma W,  W ~ CN(0, I).
Spectrogram corrector_step(const Spectrogram& x, double tau,
                           ScoreProvider& provider, double r,
                           std::mt19937_64& rng,
                           const DiffusionSchedule& sched);

// Euler step of the probability-flow ODE: X - g(tau)^2 s(X, sigma) dtau / 2.
Spectrogram predictor_step(const Spectrogram& x, double tau,
                           ScoreProvider& provider, double dtau,
                           const DiffusionSchedule& sched);

struct PosteriorUpdate {
  Spectrogram increment;  // zeta(tau) * grad * dtau
  double residual = 0.0;  // ||y - k * x_int||_2
};

// Measurement-gradient increment evaluated at x with
// zeta = zeta_prime(tau) / max(residual, 1e-12). `score` may carry
// s(x, sigma(tau)) to avoid a provider call (DPS only).
PosteriorUpdate posterior_increment(const Spectrogram& x, double tau,
                                    const MeasurementModel& model,
                                    const TimeSignal& y,
                                    ScoreProvider& provider,
                                    const SamplerConfig& cfg,
                                    const Spectrogram* score = nullptr);

struct PosteriorStep {
  Spectrogram state;
  double residual = 0.0;
};

// x + posterior_increment(x, ...).
PosteriorStep posterior_step(const Spectrogram& x, double tau,
                             const MeasurementModel& model,
                             const TimeSignal& y, ScoreProvider& provider,
                             const SamplerConfig& cfg);

struct Normalization {
  double y_gain = 1.0;  // applied to y
  double k_gain = 1.0;  // applied to k
  // Multiplies a clean signal in input scale into the sampler's scale.
  double signal_gain() const { return y_gain / k_gain; }
};

Normalization normalization_for(const TimeSignal& y, const TimeSignal& k,
                                bool enabled = true);

struct SampleResult {
  Spectrogram estimate;  // final state, in the normalized domain
  TimeSignal waveform;   // istft(estimate) mapped back to the input scale
  std::vector<double> per_step_residuals;
  std::vector<double> taus;
  Normalization normalization;
  std::string provider;
  SamplerConfig config;
};

// Predictor-corrector posterior sampling. For n = N..1 with tau = n T / N:
// corrector, predictor, then the measurement step, added to the predicted
// state. StateDPS takes the gradient at the predicted state; DPS takes it
// through the Tweedie estimate of the state entering the predictor, reusing
// the predictor's score.
SampleResult run(const TimeSignal& y, const TimeSignal& k,
                 ScoreProvider& provider, const SamplerConfig& cfg,
                 const StftConfig& stft_cfg = StftConfig::speech_default());

// Same loop on an explicit model and initial state, without normalization.
SampleResult run_from(const Spectrogram& x_init, const MeasurementModel& model,
                      const TimeSignal& y, ScoreProvider& provider,
                      const SamplerConfig& cfg, std::mt19937_64& rng);

}  // namespace dps

#endif  // DPS_SAMPLER_H_

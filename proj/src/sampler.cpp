// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dps/sampler.h"

#include <algorithm>
#include <cmath>
#include <memory>

#include "dps/errors.h"

namespace dps {

namespace {

constexpr double kResidualEps = 1e-12;

// Re-raise a library error with the failing step attached, keeping its type.
[[noreturn]] void rethrow_at_step(int step) {
  const std::string at = "sampler step " + std::to_string(step) + ": ";
  try {
    throw;
  } catch (const ProviderError& e) {
    throw ProviderError(at + e.what());
  } catch (const ProtocolError& e) {
    throw ProtocolError(at + e.what());
  } catch (const CapabilityError& e) {
    throw CapabilityError(at + e.what());
  }
}

}  // namespace

const char* to_string(LikelihoodVariant v) {
  return v == LikelihoodVariant::kDps ? "dps" : "statedps";
}
const char* to_string(JacobianMode j) {
  return j == JacobianMode::kExact ? "exact" : "identity";
}
const char* to_string(InitMode i) {
  return i == InitMode::kUnitGaussian ? "unit_gaussian" : "sigma_T_gaussian";
}
const char* to_string(TweedieMode m) {
  return m == TweedieMode::kPaper ? "paper" : "exact";
}

LikelihoodVariant parse_variant(const std::string& s) {
  if (s == "dps") return LikelihoodVariant::kDps;
  if (s == "statedps") return LikelihoodVariant::kStateDps;
  throw ContractViolation("unknown likelihood variant '" + s + "'");
}
JacobianMode parse_jacobian(const std::string& s) {
  if (s == "exact") return JacobianMode::kExact;
  if (s == "identity") return JacobianMode::kIdentity;
  throw ContractViolation("unknown jacobian mode '" + s + "'");
}
InitMode parse_init(const std::string& s) {
  if (s == "unit_gaussian") return InitMode::kUnitGaussian;
  if (s == "sigma_T_gaussian") return InitMode::kSigmaTGaussian;
  throw ContractViolation("unknown init mode '" + s + "'");
}
TweedieMode parse_tweedie(const std::string& s) {
  if (s == "paper") return TweedieMode::kPaper;
  if (s == "exact") return TweedieMode::kExact;
  throw ContractViolation("unknown tweedie mode '" + s + "'");
}

void SamplerConfig::validate() const {
  if (n_steps < 1) throw ContractViolation("SamplerConfig: n_steps must be >= 1");
  if (!(corrector_snr > 0.0))
    throw ContractViolation("SamplerConfig: corrector_snr must be positive");
  if (corrector_steps < 0)
    throw ContractViolation("SamplerConfig: corrector_steps must be >= 0");
  if (!(zeta_breakpoint > 0.0 && zeta_breakpoint < 1.0))
    throw ContractViolation("SamplerConfig: zeta_breakpoint must be in (0, 1)");
  if (!(zeta_peak >= 0.0))
    throw ContractViolation("SamplerConfig: zeta_peak must be >= 0");
}

double zeta_prime(double tau, double peak, double breakpoint) {
  if (!(tau >= 0.0 && tau <= 1.0))
    throw DomainError("zeta_prime: tau outside [0, 1]");
  if (tau <= breakpoint) return peak * (tau / breakpoint);
  return peak * ((1.0 - tau) / (1.0 - breakpoint));
}

Spectrogram corrector_step(const Spectrogram& x, double tau,
                           ScoreProvider& provider, double r,
                           std::mt19937_64& rng,
                           const DiffusionSchedule& sched) {
  const double sigma = sched.noise_level(tau);
  const Spectrogram s = provider.score(x, sigma);
  x.require_same_shape(s, "corrector_step");
  Spectrogram out = x;
  out.axpy(2.0 * r * r * sigma * sigma, s);
  add_complex_noise(out, 4.0 * r * r * sigma * sigma, rng);
  return out;
}

Spectrogram predictor_step(const Spectrogram& x, double tau,
                           ScoreProvider& provider, double dtau,
                           const DiffusionSchedule& sched) {
  const double g = sched.diffusion_coefficient(tau);
  const Spectrogram s = provider.score(x, sched.noise_level(tau));
  x.require_same_shape(s, "predictor_step");
  Spectrogram out = x;
  out.axpy(-0.5 * g * g * dtau, s);
  return out;
}

PosteriorUpdate posterior_increment(const Spectrogram& x, double tau,
                                    const MeasurementModel& model,
                                    const TimeSignal& y,
                                    ScoreProvider& provider,
                                    const SamplerConfig& cfg,
                                    const Spectrogram* score) {
  LossGrad lg =
      cfg.variant == LikelihoodVariant::kDps
          ? loss_and_grad_dps(model, cfg.schedule, x, tau, provider, y,
                              cfg.jacobian, cfg.tweedie_mode, score)
          : loss_and_grad_state(model, x, y);
  const double zeta =
      zeta_prime(tau / cfg.schedule.t_final(), cfg.zeta_peak,
                 cfg.zeta_breakpoint) /
      std::max(lg.residual, kResidualEps);
  PosteriorUpdate out;
  out.residual = lg.residual;
  out.increment = std::move(lg.grad);
  out.increment *= zeta * cfg.step();
  return out;
}

PosteriorStep posterior_step(const Spectrogram& x, double tau,
                             const MeasurementModel& model,
                             const TimeSignal& y, ScoreProvider& provider,
                             const SamplerConfig& cfg) {
  PosteriorUpdate inc = posterior_increment(x, tau, model, y, provider, cfg);
  PosteriorStep out{x, inc.residual};
  out.state += inc.increment;
  return out;
}

Normalization normalization_for(const TimeSignal& y, const TimeSignal& k,
                                bool enabled) {
  Normalization n;
  if (!enabled) return n;
  double ypk = 0.0, kpk = 0.0;
  for (double v : y) ypk = std::max(ypk, std::abs(v));
  for (double v : k) kpk = std::max(kpk, std::abs(v));
  if (ypk > 0.0) n.y_gain = 1.0 / ypk;
  if (kpk > 0.0) n.k_gain = 1.0 / kpk;
  return n;
}

SampleResult run_from(const Spectrogram& x_init, const MeasurementModel& model,
                      const TimeSignal& y, ScoreProvider& provider,
                      const SamplerConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  if (cfg.variant == LikelihoodVariant::kDps &&
      cfg.jacobian == JacobianMode::kExact && !provider.supports_jvp())
    throw CapabilityError("DPS with exact Jacobian needs a provider with JVP "
                          "support; '" + provider.describe() + "' has none");
  if (static_cast<int>(y.size()) != model.measurement_len())
    throw ContractViolation("run: measurement length inconsistent with model");

  const DiffusionSchedule& sched = cfg.schedule;
  const double dtau = cfg.step();
  SampleResult result;
  result.config = cfg;
  result.provider = provider.describe();
  result.per_step_residuals.reserve(cfg.n_steps);
  result.taus.reserve(cfg.n_steps);

  Spectrogram x = x_init;
  for (int n = cfg.n_steps; n >= 1; --n) {
    const double tau = n * sched.t_final() / cfg.n_steps;
    try {
      for (int c = 0; c < cfg.corrector_steps; ++c)
        x = corrector_step(x, tau, provider, cfg.corrector_snr, rng, sched);

      const double sigma = sched.noise_level(tau);
      const double g = sched.diffusion_coefficient(tau);
      const Spectrogram s = provider.score(x, sigma);
      x.require_same_shape(s, "predictor");
      Spectrogram predicted = x;
      predicted.axpy(-0.5 * g * g * dtau, s);

      // StateDPS differentiates at the predicted state; DPS differentiates
      // the Tweedie estimate of the state the score was taken at.
      PosteriorUpdate upd =
          cfg.variant == LikelihoodVariant::kDps
              ? posterior_increment(x, tau, model, y, provider, cfg, &s)
              : posterior_increment(predicted, tau, model, y, provider, cfg);
      predicted += upd.increment;
      x = std::move(predicted);
      result.per_step_residuals.push_back(upd.residual);
      result.taus.push_back(tau);
    } catch (const ProviderError&) {
      rethrow_at_step(n);
    } catch (const ProtocolError&) {
      rethrow_at_step(n);
    } catch (const CapabilityError&) {
      rethrow_at_step(n);
    }
  }
  result.waveform = istft(x);
  result.estimate = std::move(x);
  return result;
}

SampleResult run(const TimeSignal& y, const TimeSignal& k,
                 ScoreProvider& provider, const SamplerConfig& cfg,
                 const StftConfig& stft_cfg) {
  cfg.validate();
  if (k.empty() || y.size() < k.size())
    throw ContractViolation("run: measurement shorter than the RIR");
  const int signal_len = static_cast<int>(y.size() - k.size() + 1);

  const Normalization norm = normalization_for(y, k, cfg.normalize);
  TimeSignal yn = y, kn = k;
  for (double& v : yn) v *= norm.y_gain;
  for (double& v : kn) v *= norm.k_gain;
  MeasurementModel model(std::move(kn), 0.0,
                         std::make_shared<const StftConfig>(stft_cfg),
                         signal_len);

  std::mt19937_64 rng(cfg.seed);
  Spectrogram x = model.zero_state();
  const double init_var =
      cfg.init == InitMode::kUnitGaussian
          ? 1.0
          : std::pow(cfg.schedule.noise_level(cfg.schedule.t_final()), 2);
  add_complex_noise(x, init_var, rng);

  SampleResult result = run_from(x, model, yn, provider, cfg, rng);
  result.normalization = norm;
  const double back = 1.0 / norm.signal_gain();
  for (double& v : result.waveform) v *= back;
  return result;
}

}  // namespace dps

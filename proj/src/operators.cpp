// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dps/operators.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "dps/errors.h"
#include "dps/fft.h"

namespace dps {

namespace {

// Circular product of two zero-padded signals of FFT size n; conj_first
// turns convolution into correlation.
TimeSignal fft_product(const TimeSignal& a, const TimeSignal& b, int n,
                       bool conj_first) {
  const RealFft& fft = RealFft::get(n);
  std::vector<double> buf(n, 0.0);
  std::vector<Complex> fa(n / 2 + 1), fb(n / 2 + 1);
  std::copy(a.begin(), a.end(), buf.begin());
  fft.forward(buf.data(), fa.data());
  std::fill(buf.begin(), buf.end(), 0.0);
  std::copy(b.begin(), b.end(), buf.begin());
  fft.forward(buf.data(), fb.data());
  for (size_t i = 0; i < fa.size(); ++i)
    fa[i] = (conj_first ? std::conj(fa[i]) : fa[i]) * fb[i];
  TimeSignal out(n);
  fft.inverse(fa.data(), out.data());
  const double scale = 1.0 / n;
  for (double& v : out) v *= scale;
  return out;
}

}  // namespace

// Below this many taps on the shorter side a direct sum is cheaper and exact.
constexpr size_t kDirectSumMax = 16;

TimeSignal convolve(const TimeSignal& k, const TimeSignal& x) {
  if (k.empty() || x.empty()) throw DomainError("convolve: empty input");
  const int out_len = static_cast<int>(k.size() + x.size() - 1);
  if (std::min(k.size(), x.size()) <= kDirectSumMax) {
    TimeSignal out(out_len, 0.0);
    for (size_t i = 0; i < x.size(); ++i)
      for (size_t j = 0; j < k.size(); ++j) out[i + j] += k[j] * x[i];
    return out;
  }
  TimeSignal out = fft_product(k, x, std::max(2, next_pow2(out_len)), false);
  out.resize(out_len);
  return out;
}

TimeSignal convolve_adjoint(const TimeSignal& k, const TimeSignal& r) {
  if (k.empty() || r.size() < k.size())
    throw ContractViolation("convolve_adjoint: residual length " +
                            std::to_string(r.size()) +
                            " shorter than kernel length " +
                            std::to_string(k.size()));
  // out[n] = sum_j k[j] r[n + j]; indices stay below r.size() < FFT size, so
  // the circular correlation never wraps for n >= 0.
  const int out_len = static_cast<int>(r.size() - k.size() + 1);
  if (std::min<size_t>(k.size(), out_len) <= kDirectSumMax) {
    TimeSignal out(out_len, 0.0);
    for (int i = 0; i < out_len; ++i)
      for (size_t j = 0; j < k.size(); ++j) out[i] += k[j] * r[i + j];
    return out;
  }
  const int n = std::max(2, next_pow2(static_cast<int>(r.size())));
  TimeSignal out = fft_product(k, r, n, true);
  out.resize(out_len);
  return out;
}

MeasurementModel::MeasurementModel(TimeSignal rir, double noise_level,
                                   std::shared_ptr<const StftConfig> stft_cfg,
                                   int signal_len)
    : rir_(std::move(rir)),
      noise_level_(noise_level),
      stft_cfg_(std::move(stft_cfg)),
      signal_len_(signal_len) {
  if (rir_.empty()) throw ContractViolation("MeasurementModel: empty RIR");
  if (!(noise_level_ >= 0.0))
    throw ContractViolation("MeasurementModel: noise level must be >= 0");
  if (signal_len_ < 1)
    throw ContractViolation("MeasurementModel: signal length must be >= 1");
  stft_cfg_->validate();
}

Spectrogram MeasurementModel::zero_state() const {
  return Spectrogram(stft_cfg_, frames(), signal_len_);
}

void MeasurementModel::check_state(const Spectrogram& X,
                                   const char* what) const {
  if (X.original_len() != signal_len_ || X.frames() != frames() ||
      !(X.config() == *stft_cfg_))
    throw ContractViolation(std::string(what) +
                            ": state inconsistent with measurement model");
}

TimeSignal MeasurementModel::forward(const Spectrogram& X) const {
  check_state(X, "forward");
  return convolve(rir_, istft(X));
}

Spectrogram MeasurementModel::adjoint(const TimeSignal& r) const {
  if (static_cast<int>(r.size()) != measurement_len())
    throw ContractViolation("adjoint: residual length mismatch");
  return istft_adjoint(convolve_adjoint(rir_, r), stft_cfg_, frames());
}

namespace {

// Residual r = y - A X and gradient -2 A^T r of ||r||^2.
LossGrad quadratic_loss(const MeasurementModel& model, const Spectrogram& x,
                        const TimeSignal& y) {
  if (static_cast<int>(y.size()) != model.measurement_len())
    throw ContractViolation("measurement length " + std::to_string(y.size()) +
                            " != " + std::to_string(model.measurement_len()));
  TimeSignal r = model.forward(x);
  double loss = 0.0;
  for (size_t i = 0; i < r.size(); ++i) {
    r[i] = y[i] - r[i];
    loss += r[i] * r[i];
  }
  LossGrad out;
  out.loss = loss;
  out.residual = std::sqrt(loss);
  out.grad = model.adjoint(r);
  out.grad *= -2.0;
  return out;
}

}  // namespace

LossGrad loss_and_grad_state(const MeasurementModel& model,
                             const Spectrogram& x_tau, const TimeSignal& y) {
  return quadratic_loss(model, x_tau, y);
}

LossGrad loss_and_grad_dps(const MeasurementModel& model,
                           const DiffusionSchedule& sched,
                           const Spectrogram& x_tau, double tau,
                           ScoreProvider& provider, const TimeSignal& y,
                           JacobianMode jacobian, TweedieMode tweedie,
                           const Spectrogram* score) {
  if (jacobian == JacobianMode::kExact && !provider.supports_jvp())
    throw CapabilityError("exact Jacobian requested but provider '" +
                          provider.describe() + "' has no JVP support");
  const double sigma = sched.noise_level(tau);
  Spectrogram s = score ? *score : provider.score(x_tau, sigma);
  x_tau.require_same_shape(s, "loss_and_grad_dps");
  const Spectrogram x0_hat = tweedie_denoise(sched, x_tau, tau, s, tweedie);
  LossGrad out = quadratic_loss(model, x0_hat, y);
  if (jacobian == JacobianMode::kExact) {
    // The score Jacobian is a Hessian of log p, hence symmetric, so the
    // vector-Jacobian product is a JVP.
    const Spectrogram js = provider.jvp(x_tau, sigma, out.grad);
    out.grad.axpy(tweedie_factor(sched, tau, tweedie), js);
  }
  return out;
}

}  // namespace dps

// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DPS_OPERATORS_H_
#define DPS_OPERATORS_H_

#include <memory>

#include "dps/diffusion.h"
#include "dps/score.h"
#include "dps/stft.h"

namespace dps {

// Full linear convolution, length x.size() + k.size() - 1, via FFT.
TimeSignal convolve(const TimeSignal& k, const TimeSignal& x);
// Transpose of x -> k * x for signals of length r.size() - k.size() + 1.
TimeSignal convolve_adjoint(const TimeSignal& k, const TimeSignal& r);

// y = k * istft(X) + n, n ~ N(0, noise_level^2).
class MeasurementModel {
 public:
  MeasurementModel(TimeSignal rir, double noise_level,
                   std::shared_ptr<const StftConfig> stft_cfg, int signal_len);

  const TimeSignal& rir() const { return rir_; }
  double noise_level() const { return noise_level_; }
  const std::shared_ptr<const StftConfig>& stft_config() const {
    return stft_cfg_;
  }
  int signal_len() const { return signal_len_; }
  int frames() const { return stft_cfg_->num_frames(signal_len_); }
  int measurement_len() const {
    return signal_len_ + static_cast<int>(rir_.size()) - 1;
  }
  int state_dims() const { return stft_cfg_->num_bins() * frames(); }

  // Zero spectrogram with the state shape of this model.
  Spectrogram zero_state() const;

  // A X = k * istft(X).
  TimeSignal forward(const Spectrogram& X) const;
  // A^T r.
  Spectrogram adjoint(const TimeSignal& r) const;

 private:
  void check_state(const Spectrogram& X, const char* what) const;

  TimeSignal rir_;
  double noise_level_;
  std::shared_ptr<const StftConfig> stft_cfg_;
  int signal_len_;
};

enum class JacobianMode { kExact, kIdentity };

struct LossGrad {
  double loss = 0.0;
  Spectrogram grad;       // d loss / dX over R^{2FT}
  double residual = 0.0;  // ||y - A X_eval||_2 = sqrt(loss)
};

// loss = ||y - A X_tau||^2 and its exact gradient.
LossGrad loss_and_grad_state(const MeasurementModel& model,
                             const Spectrogram& x_tau, const TimeSignal& y);

// loss = ||y - A X0_hat||^2 with X0_hat the Tweedie estimate from X_tau.
// kExact propagates through the score: grad = (I + c J_s)^T grad_X0_hat,
// which needs JVP support; kIdentity treats the score as constant.
// `score` may carry a precomputed s(X_tau, sigma(tau)).
LossGrad loss_and_grad_dps(const MeasurementModel& model,
                           const DiffusionSchedule& sched,
                           const Spectrogram& x_tau, double tau,
                           ScoreProvider& provider, const TimeSignal& y,
                           JacobianMode jacobian, TweedieMode tweedie,
                           const Spectrogram* score = nullptr);

}  // namespace dps

#endif  // DPS_OPERATORS_H_

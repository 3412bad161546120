// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DPS_RIR_H_
#define DPS_RIR_H_

#include <cstdint>
#include <limits>

#include "dps/stft.h"

namespace dps {

struct RirSpec {
  double t60 = 0.5;          // seconds
  double drr_db = -9.0;      // direct impulse energy vs all later taps
  int length = 8000;         // samples
  int direct_delay = 0;      // samples
  double sample_rate = 16000.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Direct impulse at direct_delay followed by white Gaussian taps with
// amplitude envelope exp(-3 ln(10) m / (t60 fs)), m samples after the direct
// path. Tail scaled to hit drr_db exactly; result peak-normalized to 1.
TimeSignal synth_rir(const RirSpec& spec);

// 10 log10(direct energy / energy of every other tap), with the direct path
// taken at the largest-magnitude tap.
double measure_drr_db(const TimeSignal& k);

// Schroeder energy decay curve in dB, normalized to 0 dB at index `from`.
std::vector<double> energy_decay_curve_db(const TimeSignal& k, int from = 0);

// Reverberation time from a least-squares line through the -5..-25 dB part
// of the Schroeder curve, extrapolated to -60 dB.
double measure_t60(const TimeSignal& k, double sample_rate = 16000.0);

inline constexpr double kNoiselessSnr = std::numeric_limits<double>::infinity();

// y = k * x + n, with white Gaussian n rescaled so the realized SNR equals
// snr_db exactly. snr_db = +inf gives n = 0.
TimeSignal make_measurement(const TimeSignal& x, const TimeSignal& k,
                            double snr_db, std::uint64_t seed);

// 10 log10(||clean||^2 / ||noisy - clean||^2).
double snr_db(const TimeSignal& clean, const TimeSignal& noisy);

}  // namespace dps

#endif  // DPS_RIR_H_

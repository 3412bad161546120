// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DPS_METRICS_H_
#define DPS_METRICS_H_

#include "dps/stft.h"

namespace dps {

// Every dB metric is clamped to [-kMetricCapDb, kMetricCapDb].
inline constexpr double kMetricCapDb = 100.0;

struct MetricReport {
  double si_sdr_db = 0.0;
  double lsd_db = 0.0;
  double residual_db = 0.0;
};

double si_sdr(const TimeSignal& estimate, const TimeSignal& reference);

// RMS over time-frequency bins of the difference of 20 log10(|S| + 1e-8).
double log_spectral_distance(const TimeSignal& estimate,
                             const TimeSignal& reference,
                             const StftConfig& cfg);

// 20 log10(||y - k * estimate|| / ||y||).
double residual_consistency(const TimeSignal& y, const TimeSignal& k,
                            const TimeSignal& estimate);

MetricReport evaluate(const TimeSignal& estimate, const TimeSignal& reference,
                      const TimeSignal& y, const TimeSignal& k,
                      const StftConfig& cfg);

}  // namespace dps

#endif  // DPS_METRICS_H_

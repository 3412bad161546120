// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dps/metrics.h"

#include <algorithm>
#include <cmath>

#include "dps/errors.h"
#include "dps/operators.h"

namespace dps {

namespace {

double clamp_db(double db) {
  if (std::isnan(db)) return -kMetricCapDb;
  return std::clamp(db, -kMetricCapDb, kMetricCapDb);
}

// 10 log10(num / den) with zero handling before clamping.
double ratio_db(double num, double den) {
  if (den == 0.0) return num == 0.0 ? 0.0 : kMetricCapDb;
  if (num == 0.0) return -kMetricCapDb;
  return clamp_db(10.0 * std::log10(num / den));
}

}  // namespace

double si_sdr(const TimeSignal& estimate, const TimeSignal& reference) {
  if (estimate.size() != reference.size())
    throw ContractViolation("si_sdr: length mismatch");
  const double ref_energy = dot(reference, reference);
  if (!(ref_energy > 0.0)) throw DomainError("si_sdr: zero reference");
  const double alpha = dot(estimate, reference) / ref_energy;
  double target = 0.0, distortion = 0.0;
  for (size_t i = 0; i < reference.size(); ++i) {
    const double s = alpha * reference[i];
    const double e = estimate[i] - s;
    target += s * s;
    distortion += e * e;
  }
  return ratio_db(target, distortion);
}

double log_spectral_distance(const TimeSignal& estimate,
                             const TimeSignal& reference,
                             const StftConfig& cfg) {
  if (estimate.size() != reference.size())
    throw ContractViolation("log_spectral_distance: length mismatch");
  constexpr double kEps = 1e-8;
  const Spectrogram se = stft(estimate, cfg);
  const Spectrogram sr = stft(reference, cfg);
  double acc = 0.0;
  for (int i = 0; i < se.size(); ++i) {
    const double d = 20.0 * std::log10(std::abs(se[i]) + kEps) -
                     20.0 * std::log10(std::abs(sr[i]) + kEps);
    acc += d * d;
  }
  return std::sqrt(acc / se.size());
}

double residual_consistency(const TimeSignal& y, const TimeSignal& k,
                            const TimeSignal& estimate) {
  const TimeSignal pred = convolve(k, estimate);
  if (pred.size() != y.size())
    throw ContractViolation("residual_consistency: k * estimate length " +
                            std::to_string(pred.size()) + " != " +
                            std::to_string(y.size()));
  double res = 0.0;
  for (size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - pred[i];
    res += d * d;
  }
  return ratio_db(res, dot(y, y));
}

MetricReport evaluate(const TimeSignal& estimate, const TimeSignal& reference,
                      const TimeSignal& y, const TimeSignal& k,
                      const StftConfig& cfg) {
  MetricReport r;
  r.si_sdr_db = si_sdr(estimate, reference);
  r.lsd_db = log_spectral_distance(estimate, reference, cfg);
  r.residual_db = residual_consistency(y, k, estimate);
  return r;
}

}  // namespace dps

// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dps/rir.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "dps/errors.h"
#include "dps/operators.h"

namespace dps {

void RirSpec::validate() const {
  if (!(t60 > 0.0)) throw DomainError("RirSpec: t60 must be positive");
  if (!std::isfinite(drr_db)) throw DomainError("RirSpec: drr_db must be finite");
  if (!(sample_rate > 0.0))
    throw DomainError("RirSpec: sample_rate must be positive");
  if (direct_delay < 0 || length < direct_delay + 1)
    throw DomainError("RirSpec: need length >= direct_delay + 1");
}

TimeSignal synth_rir(const RirSpec& spec) {
  spec.validate();
  TimeSignal k(spec.length, 0.0);
  k[spec.direct_delay] = 1.0;

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double decay = 3.0 * std::log(10.0) / (spec.t60 * spec.sample_rate);
  double tail_energy = 0.0;
  for (int n = spec.direct_delay + 1; n < spec.length; ++n) {
    const double m = n - spec.direct_delay;
    k[n] = normal(rng) * std::exp(-decay * m);
    tail_energy += k[n] * k[n];
  }
  if (tail_energy > 0.0) {
    const double target = std::pow(10.0, -spec.drr_db / 10.0);
    const double gain = std::sqrt(target / tail_energy);
    for (int n = spec.direct_delay + 1; n < spec.length; ++n) k[n] *= gain;
  }
  double peak = 0.0;
  for (double v : k) peak = std::max(peak, std::abs(v));
  for (double& v : k) v /= peak;
  return k;
}

double measure_drr_db(const TimeSignal& k) {
  if (k.empty()) throw DomainError("measure_drr_db: empty RIR");
  size_t direct = 0;
  for (size_t i = 1; i < k.size(); ++i)
    if (std::abs(k[i]) > std::abs(k[direct])) direct = i;
  double rest = 0.0;
  for (size_t i = 0; i < k.size(); ++i)
    if (i != direct) rest += k[i] * k[i];
  if (rest == 0.0) return 100.0;
  return 10.0 * std::log10(k[direct] * k[direct] / rest);
}

std::vector<double> energy_decay_curve_db(const TimeSignal& k, int from) {
  if (from < 0 || from >= static_cast<int>(k.size()))
    throw DomainError("energy_decay_curve_db: start index out of range");
  std::vector<double> edc(k.size() - from);
  double acc = 0.0;
  for (int n = static_cast<int>(k.size()) - 1; n >= from; --n) {
    acc += k[n] * k[n];
    edc[n - from] = acc;
  }
  const double total = edc.front();
  if (!(total > 0.0)) throw EstimationError("energy decay of a silent RIR");
  for (double& e : edc)
    e = e > 0.0 ? 10.0 * std::log10(e / total)
                : -std::numeric_limits<double>::infinity();
  return edc;
}

double measure_t60(const TimeSignal& k, double sample_rate) {
  if (k.empty()) throw DomainError("measure_t60: empty RIR");
  const std::vector<double> edc = energy_decay_curve_db(k);
  double st = 0, sd = 0, stt = 0, std_ = 0;
  int count = 0;
  for (size_t n = 0; n < edc.size(); ++n) {
    if (edc[n] > -5.0 || edc[n] < -25.0) continue;
    const double t = n / sample_rate;
    st += t;
    sd += edc[n];
    stt += t * t;
    std_ += t * edc[n];
    ++count;
  }
  if (count < 2)
    throw EstimationError("measure_t60: no decaying -5..-25 dB segment");
  const double denom = count * stt - st * st;
  if (!(denom > 0.0))
    throw EstimationError("measure_t60: degenerate decay segment");
  const double slope = (count * std_ - st * sd) / denom;  // dB per second
  if (!(slope < 0.0)) throw EstimationError("measure_t60: RIR does not decay");
  return -60.0 / slope;
}

TimeSignal make_measurement(const TimeSignal& x, const TimeSignal& k,
                            double snr_db, std::uint64_t seed) {
  TimeSignal y = convolve(k, x);
  if (std::isinf(snr_db) && snr_db > 0.0) return y;
  if (std::isnan(snr_db)) throw DomainError("make_measurement: SNR is NaN");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  TimeSignal noise(y.size());
  double noise_energy = 0.0, signal_energy = 0.0;
  for (size_t i = 0; i < y.size(); ++i) {
    noise[i] = normal(rng);
    noise_energy += noise[i] * noise[i];
    signal_energy += y[i] * y[i];
  }
  const double gain =
      std::sqrt(signal_energy / (noise_energy * std::pow(10.0, snr_db / 10.0)));
  for (size_t i = 0; i < y.size(); ++i) y[i] += gain * noise[i];
  return y;
}

double snr_db(const TimeSignal& clean, const TimeSignal& noisy) {
  if (clean.size() != noisy.size())
    throw ContractViolation("snr_db: length mismatch");
  double s = 0.0, e = 0.0;
  for (size_t i = 0; i < clean.size(); ++i) {
    s += clean[i] * clean[i];
    const double d = noisy[i] - clean[i];
    e += d * d;
  }
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(s / e);
}

}  // namespace dps

// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DPS_VERIFY_H_
#define DPS_VERIFY_H_

#include <cstdint>
#include <string>
#include <vector>

#include "dps/stft.h"

namespace dps::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

// Suite names accepted by run_suite, in the order "all" runs them.
const std::vector<std::string>& suite_names();

// Runs one named suite, or every suite for "all". Throws ContractViolation
// for an unknown name.
std::vector<CheckResult> run_suite(const std::string& name);

// Harmonic, amplitude-modulated test signal with noisy onsets, peak 0.5.
TimeSignal speech_like(int len, double sample_rate, std::uint64_t seed);

}  // namespace dps::verify

#endif  // DPS_VERIFY_H_

// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dps/fft.h"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>

#include "dps/errors.h"

namespace dps {

namespace {

// FFTW's planner is not thread-safe; every plan creation/destruction goes
// through this lock.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

RealFft::RealFft(int n) : n_(n) {
  if (n < 2 || n % 2 != 0)
    throw ContractViolation("RealFft: size must be even and >= 2, got " +
                            std::to_string(n));
  double* r = fftw_alloc_real(n);
  fftw_complex* c = fftw_alloc_complex(n / 2 + 1);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  forward_plan_ = fftw_plan_dft_r2c_1d(n, r, c, flags);
  inverse_plan_ = fftw_plan_dft_c2r_1d(n, c, r, flags);
  fftw_free(r);
  fftw_free(c);
  if (!forward_plan_ || !inverse_plan_)
    throw NumericalError("RealFft: FFTW planning failed");
}

RealFft::~RealFft() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
}

const RealFft& RealFft::get(int n) {
  // The mutex must outlive the cache, whose destructors lock it.
  std::mutex& m = planner_mutex();
  static std::map<int, std::unique_ptr<RealFft>> cache;
  std::lock_guard<std::mutex> lock(m);
  auto it = cache.find(n);
  if (it == cache.end())
    it = cache.emplace(n, std::unique_ptr<RealFft>(new RealFft(n))).first;
  return *it->second;
}

void RealFft::forward(const double* in, std::complex<double>* out) const {
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_),
                       const_cast<double*>(in),
                       reinterpret_cast<fftw_complex*>(out));
}

void RealFft::inverse(std::complex<double>* in, double* out) const {
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_),
                       reinterpret_cast<fftw_complex*>(in), out);
}

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace dps

// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DPS_FFT_H_
#define DPS_FFT_H_

#include <complex>

namespace dps {

// Real-to-complex transform of even length n backed by FFTW. Plans are built
// once per size and are immutable afterwards; execution is reentrant.
class RealFft {
 public:
  // Shared plan for size n. Thread-safe.
  static const RealFft& get(int n);

  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft();

  int size() const { return n_; }

  // out[0..n/2] = sum_m in[m] exp(-2 pi i k m / n). Unnormalized.
  void forward(const double* in, std::complex<double>* out) const;
  // out[m] = sum over the Hermitian extension of in, unnormalized (no 1/n).
  // Imaginary parts of in[0] and in[n/2] are ignored. `in` is clobbered.
  void inverse(std::complex<double>* in, double* out) const;

 private:
  explicit RealFft(int n);

  int n_;
  void* forward_plan_;
  void* inverse_plan_;
};

// Smallest power of two >= n.
int next_pow2(int n);

}  // namespace dps

#endif  // DPS_FFT_H_

// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DPS_STFT_H_
#define DPS_STFT_H_

#include <complex>
#include <memory>
#include <vector>

namespace dps {

using TimeSignal = std::vector<double>;
using Complex = std::complex<double>;

// Analysis/synthesis configuration.
//
// Frame t covers signal samples [t*hop - edge_pad, t*hop - edge_pad +
// window_len) with edge_pad = window_len - hop, so every sample of the
// original signal sees the same set of window offsets as an interior sample.
// The window_len samples are placed in the middle of an fft_len buffer
// ((fft_len - window_len) / 2 zeros on each side).
struct StftConfig {
  int window_len = 510;
  int hop = 128;
  int fft_len = 512;
  std::vector<double> window;
  double sample_rate = 16000.0;

  // 510-point square-root periodic Hann, hop 128, 512-point FFT, 16 kHz.
  static StftConfig speech_default();
  static StftConfig sqrt_hann(int window_len, int hop, int fft_len,
                              double sample_rate = 16000.0);

  // Throws ContractViolation when the configuration cannot be inverted.
  void validate() const;

  int num_bins() const { return fft_len / 2 + 1; }
  int edge_pad() const { return window_len - hop; }
  int window_offset() const { return (fft_len - window_len) / 2; }
  int num_frames(int signal_len) const;

  // Sum over frames of window^2 seen by signal sample n; periodic in n with
  // period hop.
  double overlap_norm(int n) const;
  // (max - min) / mean of overlap_norm over one period. Zero for a tight frame.
  double overlap_ripple() const;

  bool operator==(const StftConfig& other) const = default;
};

// One-sided complex spectrogram, F = fft_len/2 + 1 rows (frequency) by T
// columns (frames), stored frequency-major: bin (f, t) at f * T + t.
//
// When used as a point of R^{2FT} (gradients, adjoints, inner products) each
// bin contributes its real and imaginary parts as two plain coordinates.
class Spectrogram {
 public:
  Spectrogram() = default;
  Spectrogram(std::shared_ptr<const StftConfig> config, int frames,
              int original_len);

  int bins() const { return bins_; }
  int frames() const { return frames_; }
  int size() const { return static_cast<int>(data_.size()); }
  int original_len() const { return original_len_; }
  const StftConfig& config() const { return *config_; }
  const std::shared_ptr<const StftConfig>& config_ptr() const {
    return config_;
  }

  Complex& at(int f, int t) { return data_[f * frames_ + t]; }
  const Complex& at(int f, int t) const { return data_[f * frames_ + t]; }
  Complex& operator[](int i) { return data_[i]; }
  const Complex& operator[](int i) const { return data_[i]; }
  std::vector<Complex>& data() { return data_; }
  const std::vector<Complex>& data() const { return data_; }

  // Same shape, config and original length.
  bool same_shape(const Spectrogram& other) const;
  // Throws ContractViolation unless same_shape(other).
  void require_same_shape(const Spectrogram& other, const char* what) const;

  // Zero spectrogram of identical shape.
  Spectrogram zeros_like() const;

  Spectrogram& operator+=(const Spectrogram& other);
  Spectrogram& operator-=(const Spectrogram& other);
  Spectrogram& operator*=(double a);
  // this += a * other
  Spectrogram& axpy(double a, const Spectrogram& other);

  // Real inner product over R^{2FT}.
  double dot(const Spectrogram& other) const;
  double norm() const;

 private:
  std::shared_ptr<const StftConfig> config_;
  int bins_ = 0;
  int frames_ = 0;
  int original_len_ = 0;
  std::vector<Complex> data_;
};

Spectrogram operator+(Spectrogram a, const Spectrogram& b);
Spectrogram operator-(Spectrogram a, const Spectrogram& b);
Spectrogram operator*(double s, Spectrogram a);

Spectrogram stft(const TimeSignal& x,
                 std::shared_ptr<const StftConfig> config);
Spectrogram stft(const TimeSignal& x, const StftConfig& config);

// Weighted overlap-add synthesis, truncated to X.original_len().
TimeSignal istft(const Spectrogram& X);

// Transpose of istft as a linear map R^{2FT} -> R^L. x.size() becomes the
// original length of the returned spectrogram.
Spectrogram istft_adjoint(const TimeSignal& x,
                          std::shared_ptr<const StftConfig> config,
                          int frames);

// sum_k c_k |X_k|^2 with c_k = 1 at DC/Nyquist and 2 elsewhere; for
// X = stft(x) this equals fft_len * sum_n overlap_norm(n) x[n]^2.
double two_sided_energy(const Spectrogram& X);

double dot(const TimeSignal& a, const TimeSignal& b);
double norm(const TimeSignal& a);

}  // namespace dps

#endif  // DPS_STFT_H_

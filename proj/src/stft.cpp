// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dps/stft.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dps/errors.h"
#include "dps/fft.h"

namespace dps {

namespace {

constexpr double kOverlapEps = 1e-12;

std::vector<double> overlap_period(const StftConfig& cfg) {
  std::vector<double> period(cfg.hop);
  for (int r = 0; r < cfg.hop; ++r) period[r] = cfg.overlap_norm(r);
  return period;
}

// First frame whose window covers signal sample 0 is frame 0; sample n of
// frame t sits at window offset n - (t * hop - edge_pad).
inline int frame_start(const StftConfig& cfg, int t) {
  return t * cfg.hop - cfg.edge_pad();
}

}  // namespace

StftConfig StftConfig::speech_default() {
  return sqrt_hann(510, 128, 512, 16000.0);
}

StftConfig StftConfig::sqrt_hann(int window_len, int hop, int fft_len,
                                 double sample_rate) {
  StftConfig cfg;
  cfg.window_len = window_len;
  cfg.hop = hop;
  cfg.fft_len = fft_len;
  cfg.sample_rate = sample_rate;
  cfg.window.resize(std::max(window_len, 0));
  for (int m = 0; m < window_len; ++m) {
    const double hann =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * m / window_len);
    cfg.window[m] = std::sqrt(hann);
  }
  cfg.validate();
  return cfg;
}

void StftConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw ContractViolation("StftConfig: " + msg);
  };
  if (window_len < 1 || hop < 1) fail("window_len and hop must be positive");
  if (hop > window_len) fail("hop must not exceed window_len");
  if (fft_len < window_len || fft_len % 2 != 0)
    fail("fft_len must be even and >= window_len");
  if ((fft_len - window_len) % 2 != 0)
    fail("fft_len - window_len must be even for symmetric padding");
  if (static_cast<int>(window.size()) != window_len)
    fail("window length must equal window_len");
  if (!(sample_rate > 0.0)) fail("sample_rate must be positive");
  double lo = INFINITY, hi = 0.0;
  for (int r = 0; r < hop; ++r) {
    const double w = overlap_norm(r);
    lo = std::min(lo, w);
    hi = std::max(hi, w);
  }
  if (!(hi > 0.0) || lo <= kOverlapEps * hi)
    fail("accumulated squared window vanishes; synthesis is not invertible");
}

int StftConfig::num_frames(int signal_len) const {
  return (signal_len + edge_pad() + hop - 1) / hop;
}

double StftConfig::overlap_norm(int n) const {
  double acc = 0.0;
  for (int m = (n + edge_pad()) % hop; m < window_len; m += hop)
    acc += window[m] * window[m];
  return acc;
}

double StftConfig::overlap_ripple() const {
  double lo = INFINITY, hi = 0.0, mean = 0.0;
  for (int r = 0; r < hop; ++r) {
    const double w = overlap_norm(r);
    lo = std::min(lo, w);
    hi = std::max(hi, w);
    mean += w;
  }
  mean /= hop;
  return (hi - lo) / mean;
}

Spectrogram::Spectrogram(std::shared_ptr<const StftConfig> config, int frames,
                         int original_len)
    : config_(std::move(config)),
      bins_(config_->num_bins()),
      frames_(frames),
      original_len_(original_len),
      data_(static_cast<size_t>(bins_) * frames) {}

bool Spectrogram::same_shape(const Spectrogram& other) const {
  if (bins_ != other.bins_ || frames_ != other.frames_ ||
      original_len_ != other.original_len_)
    return false;
  return config_ == other.config_ ||
         (config_ && other.config_ && *config_ == *other.config_);
}

void Spectrogram::require_same_shape(const Spectrogram& other,
                                     const char* what) const {
  if (!same_shape(other))
    throw ContractViolation(std::string(what) + ": spectrogram shape mismatch (" +
                            std::to_string(bins_) + "x" + std::to_string(frames_) +
                            " vs " + std::to_string(other.bins_) + "x" +
                            std::to_string(other.frames_) + ")");
}

Spectrogram Spectrogram::zeros_like() const {
  return Spectrogram(config_, frames_, original_len_);
}

Spectrogram& Spectrogram::operator+=(const Spectrogram& other) {
  require_same_shape(other, "operator+=");
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Spectrogram& Spectrogram::operator-=(const Spectrogram& other) {
  require_same_shape(other, "operator-=");
  for (size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Spectrogram& Spectrogram::operator*=(double a) {
  for (auto& z : data_) z *= a;
  return *this;
}

Spectrogram& Spectrogram::axpy(double a, const Spectrogram& other) {
  require_same_shape(other, "axpy");
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += a * other.data_[i];
  return *this;
}

double Spectrogram::dot(const Spectrogram& other) const {
  require_same_shape(other, "dot");
  double acc = 0.0;
  for (size_t i = 0; i < data_.size(); ++i)
    acc += data_[i].real() * other.data_[i].real() +
           data_[i].imag() * other.data_[i].imag();
  return acc;
}

double Spectrogram::norm() const {
  double acc = 0.0;
  for (const auto& z : data_) acc += std::norm(z);
  return std::sqrt(acc);
}

Spectrogram operator+(Spectrogram a, const Spectrogram& b) { return a += b; }
Spectrogram operator-(Spectrogram a, const Spectrogram& b) { return a -= b; }
Spectrogram operator*(double s, Spectrogram a) { return a *= s; }

Spectrogram stft(const TimeSignal& x, const StftConfig& config) {
  return stft(x, std::make_shared<const StftConfig>(config));
}

Spectrogram stft(const TimeSignal& x,
                 std::shared_ptr<const StftConfig> config) {
  if (x.empty()) throw DomainError("stft: empty signal");
  const StftConfig& cfg = *config;
  const int len = static_cast<int>(x.size());
  const int frames = cfg.num_frames(len);
  Spectrogram out(config, frames, len);

  const RealFft& fft = RealFft::get(cfg.fft_len);
  std::vector<double> buf(cfg.fft_len);
  std::vector<Complex> spec(cfg.num_bins());
  const int off = cfg.window_offset();
  for (int t = 0; t < frames; ++t) {
    std::fill(buf.begin(), buf.end(), 0.0);
    const int start = frame_start(cfg, t);
    for (int m = 0; m < cfg.window_len; ++m) {
      const int n = start + m;
      if (n >= 0 && n < len) buf[off + m] = cfg.window[m] * x[n];
    }
    fft.forward(buf.data(), spec.data());
    for (int f = 0; f < out.bins(); ++f) out.at(f, t) = spec[f];
  }
  return out;
}

TimeSignal istft(const Spectrogram& X) {
  const StftConfig& cfg = X.config();
  const int len = X.original_len();
  if (len < 1 || cfg.num_frames(len) != X.frames())
    throw ContractViolation("istft: frame count " + std::to_string(X.frames()) +
                            " inconsistent with original length " +
                            std::to_string(len));
  TimeSignal out(len, 0.0);
  const RealFft& fft = RealFft::get(cfg.fft_len);
  std::vector<Complex> spec(cfg.num_bins());
  std::vector<double> frame(cfg.fft_len);
  const double scale = 1.0 / cfg.fft_len;
  const int off = cfg.window_offset();
  for (int t = 0; t < X.frames(); ++t) {
    for (int f = 0; f < X.bins(); ++f) spec[f] = X.at(f, t);
    fft.inverse(spec.data(), frame.data());
    const int start = frame_start(cfg, t);
    for (int m = 0; m < cfg.window_len; ++m) {
      const int n = start + m;
      if (n >= 0 && n < len) out[n] += cfg.window[m] * frame[off + m] * scale;
    }
  }
  const std::vector<double> period = overlap_period(cfg);
  for (int n = 0; n < len; ++n)
    out[n] /= std::max(period[n % cfg.hop], kOverlapEps);
  return out;
}

Spectrogram istft_adjoint(const TimeSignal& x,
                          std::shared_ptr<const StftConfig> config,
                          int frames) {
  const StftConfig& cfg = *config;
  const int len = static_cast<int>(x.size());
  if (len < 1 || cfg.num_frames(len) != frames)
    throw ContractViolation("istft_adjoint: signal length " +
                            std::to_string(len) + " inconsistent with " +
                            std::to_string(frames) + " frames");
  const std::vector<double> period = overlap_period(cfg);
  TimeSignal u(len);
  for (int n = 0; n < len; ++n)
    u[n] = x[n] / std::max(period[n % cfg.hop], kOverlapEps);

  Spectrogram out(config, frames, len);
  const RealFft& fft = RealFft::get(cfg.fft_len);
  std::vector<double> buf(cfg.fft_len);
  std::vector<Complex> spec(cfg.num_bins());
  const int off = cfg.window_offset();
  const int nyquist = cfg.fft_len / 2;
  const double edge = 1.0 / cfg.fft_len;
  const double inner = 2.0 / cfg.fft_len;
  for (int t = 0; t < frames; ++t) {
    std::fill(buf.begin(), buf.end(), 0.0);
    const int start = frame_start(cfg, t);
    for (int m = 0; m < cfg.window_len; ++m) {
      const int n = start + m;
      if (n >= 0 && n < len) buf[off + m] = cfg.window[m] * u[n];
    }
    fft.forward(buf.data(), spec.data());
    out.at(0, t) = Complex(spec[0].real() * edge, 0.0);
    for (int f = 1; f < nyquist; ++f) out.at(f, t) = spec[f] * inner;
    out.at(nyquist, t) = Complex(spec[nyquist].real() * edge, 0.0);
  }
  return out;
}

double two_sided_energy(const Spectrogram& X) {
  const int nyquist = X.bins() - 1;
  double acc = 0.0;
  for (int f = 0; f < X.bins(); ++f) {
    const double c = (f == 0 || f == nyquist) ? 1.0 : 2.0;
    for (int t = 0; t < X.frames(); ++t) acc += c * std::norm(X.at(f, t));
  }
  return acc;
}

double dot(const TimeSignal& a, const TimeSignal& b) {
  if (a.size() != b.size())
    throw ContractViolation("dot: length mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm(const TimeSignal& a) { return std::sqrt(dot(a, a)); }

}  // namespace dps

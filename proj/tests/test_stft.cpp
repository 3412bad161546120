// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "dps/errors.h"
#include "dps/stft.h"
#include "test_util.h"

using namespace dps;

TEST_SUITE("stft") {

TEST_CASE("default configuration") {
  const StftConfig c = StftConfig::speech_default();
  CHECK(c.window_len == 510);
  CHECK(c.hop == 128);
  CHECK(c.fft_len == 512);
  CHECK(c.sample_rate == 16000.0);
  CHECK(c.num_bins() == 257);
  CHECK(c.window_offset() == 1);
  CHECK(c.edge_pad() == 382);
  CHECK(c.window.size() == 510u);
  CHECK(c.window[0] == 0.0);
  CHECK(c.window[255] == doctest::Approx(1.0));
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("frame count covers every sample with full window support") {
  const StftConfig c = StftConfig::speech_default();
  for (int len : {1, 127, 128, 129, 510, 16000}) {
    const int t = c.num_frames(len);
    CHECK(t == (len + c.edge_pad() + c.hop - 1) / c.hop);
    // The last frame still reaches the last sample.
    CHECK((t - 1) * c.hop - c.edge_pad() + c.window_len >= len);
  }
}

TEST_CASE("overlap norm is positive and periodic; the default window ripples") {
  const StftConfig c = StftConfig::speech_default();
  for (int n = 0; n < 3 * c.hop; ++n) {
    CHECK(c.overlap_norm(n) > 0.0);
    CHECK(c.overlap_norm(n) == doctest::Approx(c.overlap_norm(n % c.hop)));
  }
  // 510 points at hop 128 is not a tight frame.
  CHECK(c.overlap_ripple() > 1e-4);
  CHECK(c.overlap_ripple() < 1e-2);
  CHECK(StftConfig::sqrt_hann(512, 128, 512).overlap_ripple() < 1e-12);
}

TEST_CASE("invalid configurations") {
  CHECK_THROWS_AS(StftConfig::sqrt_hann(64, 80, 64), ContractViolation);
  CHECK_THROWS_AS(StftConfig::sqrt_hann(64, 16, 63), ContractViolation);
  CHECK_THROWS_AS(StftConfig::sqrt_hann(64, 16, 32), ContractViolation);
  CHECK_THROWS_AS(StftConfig::sqrt_hann(63, 16, 64), ContractViolation);
  StftConfig c = StftConfig::speech_default();
  c.window.pop_back();
  CHECK_THROWS_AS(c.validate(), ContractViolation);
  c = StftConfig::speech_default();
  std::fill(c.window.begin(), c.window.end(), 0.0);
  CHECK_THROWS_AS(c.validate(), ContractViolation);
}

TEST_CASE("empty signal is a domain error") {
  CHECK_THROWS_AS(stft(TimeSignal{}, StftConfig::speech_default()), DomainError);
}

TEST_CASE("zeros map to zeros") {
  const Spectrogram x = stft(TimeSignal(1000, 0.0), test::speech());
  for (const Complex& v : x.data()) CHECK(v == Complex(0.0, 0.0));
  for (double v : istft(x)) CHECK(v == 0.0);
  for (const Complex& v : istft_adjoint(TimeSignal(1000, 0.0), test::speech(), x.frames()).data())
    CHECK(v == Complex(0.0, 0.0));
}

TEST_CASE("frames match a direct DFT of the windowed signal") {
  std::mt19937_64 rng(3);
  const auto c = test::speech();
  const TimeSignal x = test::randn(2000, rng);
  const Spectrogram s = stft(x, c);
  const int n_fft = c->fft_len;
  for (int t : {0, 3, 10, s.frames() - 1}) {
    const int start = t * c->hop - c->edge_pad();
    for (int f : {0, 1, 77, 256}) {
      Complex acc = 0.0;
      for (int m = 0; m < c->window_len; ++m) {
        const int n = start + m;
        if (n < 0 || n >= 2000) continue;
        const double ang = -2.0 * std::numbers::pi * f * (m + c->window_offset()) / n_fft;
        acc += c->window[m] * x[n] * Complex(std::cos(ang), std::sin(ang));
      }
      CHECK(std::abs(s.at(f, t) - acc) <= 1e-10 * (1.0 + std::abs(acc)));
    }
  }
}

TEST_CASE("bin-centred sinusoid stays in its main lobe") {
  const auto c = test::speech();
  const int bin = 64, len = 8000;
  TimeSignal x(len);
  for (int n = 0; n < len; ++n)
    x[n] = std::cos(2.0 * std::numbers::pi * bin * n / c->fft_len);
  const Spectrogram s = stft(x, c);
  for (int t = 4; t < s.frames() - 4; ++t) {
    double total = 0.0, lobe = 0.0, peak = 0.0;
    int argmax = 0;
    for (int f = 0; f < s.bins(); ++f) {
      const double e = std::norm(s.at(f, t));
      total += e;
      if (std::abs(f - bin) <= 1) lobe += e;
      if (e > peak) peak = e, argmax = f;
    }
    CHECK(argmax == bin);
    CHECK(lobe / total >= 0.99);
  }
}

TEST_CASE("round trip on many lengths") {
  std::mt19937_64 rng(4);
  const auto c = test::speech();
  std::vector<int> lengths = {1, 2, 127, 128, 129, 382, 510, 511, 4096, 16000, 80000};
  std::uniform_int_distribution<int> pick(1, 80000);
  for (int i = 0; i < 5; ++i) lengths.push_back(pick(rng));
  for (int len : lengths) {
    const TimeSignal x = test::randn(len, rng);
    const Spectrogram s = stft(x, c);
    CHECK(s.original_len() == len);
    const TimeSignal back = istft(s);
    REQUIRE(back.size() == x.size());
    CHECK(test::rel_l2(back, x) <= 1e-8);
  }
  SUBCASE("small configurations") {
    for (auto cc : {test::cfg(2, 1, 2), test::cfg(4, 2, 4), test::cfg(16, 4, 18)}) {
      const TimeSignal x = test::randn(37, rng);
      CHECK(test::rel_l2(istft(stft(x, cc)), x) <= 1e-12);
    }
  }
}

TEST_CASE("linearity") {
  std::mt19937_64 rng(5);
  const auto c = test::speech();
  const TimeSignal a = test::randn(3000, rng), b = test::randn(3000, rng);
  const double p = 0.7, q = -1.9;
  TimeSignal mix(3000);
  for (int i = 0; i < 3000; ++i) mix[i] = p * a[i] + q * b[i];
  const Spectrogram lhs = stft(mix, c);
  const Spectrogram rhs = p * stft(a, c) + q * stft(b, c);
  CHECK(test::rel_l2(lhs, rhs) <= 1e-12);

  const int frames = c->num_frames(3000);
  const Spectrogram x1 = test::randn_spec(c, frames, 3000, rng);
  const Spectrogram x2 = test::randn_spec(c, frames, 3000, rng);
  const TimeSignal u = istft(p * x1 + q * x2);
  TimeSignal v = istft(x1);
  const TimeSignal w = istft(x2);
  for (int i = 0; i < 3000; ++i) v[i] = p * v[i] + q * w[i];
  CHECK(test::rel_l2(u, v) <= 1e-12);
}

TEST_CASE("istft adjoint") {
  std::mt19937_64 rng(6);
  for (auto c : {test::speech(), test::cfg(16, 4, 16), test::cfg(2, 1, 2)}) {
    for (int len : {1, 50, 1000}) {
      const int frames = c->num_frames(len);
      const Spectrogram x = test::randn_spec(c, frames, len, rng);
      const TimeSignal u = test::randn(len, rng);
      const double lhs = dot(istft(x), u);
      const double rhs = x.dot(istft_adjoint(u, c, frames));
      CHECK(std::abs(lhs - rhs) <= 1e-10 * std::abs(lhs));
    }
  }
  const auto c = test::speech();
  CHECK_THROWS_AS(istft_adjoint(TimeSignal(1000), c, c->num_frames(1000) + 1),
                  ContractViolation);
  CHECK_THROWS_AS(istft_adjoint(TimeSignal{}, c, 3), ContractViolation);
}

TEST_CASE("energy bookkeeping") {
  std::mt19937_64 rng(7);
  SUBCASE("weighted identity holds for any window") {
    const auto c = test::speech();
    const TimeSignal x = test::randn(5000, rng);
    double weighted = 0.0;
    for (int n = 0; n < 5000; ++n) weighted += c->overlap_norm(n) * x[n] * x[n];
    CHECK(two_sided_energy(stft(x, c)) ==
          doctest::Approx(c->fft_len * weighted).epsilon(1e-12));
  }
  SUBCASE("tight frame keeps a constant energy ratio") {
    const auto c = test::cfg(512, 128, 512);
    double first = 0.0;
    for (int trial = 0; trial < 6; ++trial) {
      const TimeSignal x = test::randn(1000 + 333 * trial, rng);
      const double ratio = two_sided_energy(stft(x, c)) / dot(x, x);
      if (trial == 0) first = ratio;
      CHECK(std::abs(ratio - first) / first <= 1e-6);
    }
  }
}

TEST_CASE("spectrogram arithmetic and shape checks") {
  std::mt19937_64 rng(8);
  const auto c = test::cfg(8, 2, 8);
  const Spectrogram a = test::randn_spec(c, 3, 4, rng);
  const Spectrogram b = test::randn_spec(c, 3, 4, rng);
  CHECK(a.bins() == 5);
  CHECK(a.size() == 15);
  CHECK(a.at(2, 1) == a[2 * 3 + 1]);
  Spectrogram d = a;
  d.axpy(2.0, b);
  CHECK(test::rel_l2(d, a + 2.0 * b) <= 1e-15);
  CHECK(a.dot(a) == doctest::Approx(a.norm() * a.norm()));
  CHECK(a.same_shape(b));
  // Same parameters through a different pointer still match.
  CHECK(a.same_shape(Spectrogram(test::cfg(8, 2, 8), 3, 4)));
  const Spectrogram e = test::randn_spec(c, 4, 6, rng);
  CHECK_FALSE(a.same_shape(e));
  Spectrogram f = a;
  CHECK_THROWS_AS(f += e, ContractViolation);
  CHECK_THROWS_AS((void)a.dot(e), ContractViolation);
}

}  // TEST_SUITE

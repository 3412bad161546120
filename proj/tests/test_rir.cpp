// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>

#include "doctest.h"
#include "dps/errors.h"
#include "dps/operators.h"
#include "dps/rir.h"
#include "test_util.h"

using namespace dps;

TEST_SUITE("rir") {

TEST_CASE("synthesized RIR shape") {
  RirSpec spec;
  spec.seed = 3;
  const TimeSignal k = synth_rir(spec);
  REQUIRE(k.size() == 8000u);
  CHECK(k[0] == 1.0);
  double peak = 0.0;
  for (double v : k) peak = std::max(peak, std::abs(v));
  CHECK(peak == 1.0);

  spec.direct_delay = 40;
  const TimeSignal kd = synth_rir(spec);
  for (int n = 0; n < 40; ++n) CHECK(kd[n] == 0.0);
  CHECK(kd[40] == 1.0);
}

TEST_CASE("measured T60 of a synthesized RIR") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RirSpec spec;
    spec.seed = seed;
    const double t60 = measure_t60(synth_rir(spec));
    CHECK(t60 >= 0.45);
    CHECK(t60 <= 0.55);
  }
}

TEST_CASE("deterministic exponential envelope") {
  const double fs = 16000.0;
  for (double t60 : {0.2, 0.5, 1.0}) {
    const double decay = 3.0 * std::log(10.0) / (t60 * fs);
    TimeSignal k(static_cast<int>(2.0 * t60 * fs));
    for (size_t n = 0; n < k.size(); ++n) k[n] = std::exp(-decay * n);
    CHECK(measure_t60(k, fs) == doctest::Approx(t60).epsilon(0.02));
  }
}

TEST_CASE("estimation failures") {
  TimeSignal impulse(1000, 0.0);
  impulse[0] = 1.0;
  CHECK_THROWS_AS(measure_t60(impulse), EstimationError);
  CHECK_THROWS_AS(measure_t60(TimeSignal(100, 0.0)), EstimationError);
  CHECK_THROWS_AS(measure_t60(TimeSignal{}), DomainError);
  CHECK_THROWS_AS(energy_decay_curve_db(impulse, 1000), DomainError);
}

TEST_CASE("direct-to-reverberant ratio") {
  for (double drr : {-9.0, 0.0, 6.0}) {
    RirSpec spec;
    spec.drr_db = drr;
    spec.seed = 8;
    CHECK(std::abs(measure_drr_db(synth_rir(spec)) - drr) <= 1.0);
  }
}

TEST_CASE("Schroeder curve follows the expected decay") {
  // Expected EDC from the expected tap energies: 1 at the direct path and
  // tail_gain * exp(-2 decay m) afterwards.
  RirSpec spec;
  const double decay = 3.0 * std::log(10.0) / (spec.t60 * spec.sample_rate);
  std::vector<double> expected_energy(spec.length);
  double tail = 0.0;
  for (int m = 1; m < spec.length; ++m) tail += std::exp(-2.0 * decay * m);
  const double tail_gain = std::pow(10.0, -spec.drr_db / 10.0) / tail;
  expected_energy[0] = 1.0;
  for (int m = 1; m < spec.length; ++m)
    expected_energy[m] = tail_gain * std::exp(-2.0 * decay * m);
  TimeSignal expected_amplitude(spec.length);
  for (int i = 0; i < spec.length; ++i) expected_amplitude[i] = std::sqrt(expected_energy[i]);
  const std::vector<double> ideal = energy_decay_curve_db(expected_amplitude);

  const int horizon = static_cast<int>(spec.t60 / 2.0 * spec.sample_rate);
  std::vector<double> mean(horizon, 0.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    spec.seed = seed;
    const std::vector<double> edc = energy_decay_curve_db(synth_rir(spec));
    for (int n = 0; n < horizon; ++n) mean[n] += edc[n] / 10.0;
  }
  double worst = 0.0;
  for (int n = 0; n < horizon; ++n) worst = std::max(worst, std::abs(mean[n] - ideal[n]));
  CHECK(worst <= 3.0);
  // Halfway down the horizon the curve sits near -15 dB below the direct path.
  CHECK(ideal[horizon / 2] == doctest::Approx(-15.0).epsilon(0.1));
}

TEST_CASE("very short T60 with strong direct path is nearly an impulse") {
  RirSpec spec;
  spec.t60 = 0.01;
  spec.drr_db = 40.0;
  const TimeSignal k = synth_rir(spec);
  CHECK(k[0] == 1.0);
  CHECK(measure_drr_db(k) == doctest::Approx(40.0).epsilon(1e-9));
  double rest = 0.0;
  for (size_t n = 1; n < k.size(); ++n) rest += k[n] * k[n];
  CHECK(rest <= 1.0001e-4);
}

TEST_CASE("invalid RIR parameters") {
  RirSpec spec;
  spec.t60 = 0.0;
  CHECK_THROWS_AS(synth_rir(spec), DomainError);
  spec = RirSpec{};
  spec.direct_delay = 8000;
  CHECK_THROWS_AS(synth_rir(spec), DomainError);
  spec = RirSpec{};
  spec.drr_db = NAN;
  CHECK_THROWS_AS(synth_rir(spec), DomainError);
}

TEST_CASE("measurement noise hits the requested SNR") {
  std::mt19937_64 rng(9);
  const TimeSignal x = test::randn(4000, rng);
  RirSpec spec;
  spec.length = 2000;
  const TimeSignal k = synth_rir(spec);
  const TimeSignal clean = convolve(k, x);
  for (double snr : {30.0, 20.0, 10.0, 0.0, -5.0}) {
    const TimeSignal y = make_measurement(x, k, snr, 4);
    CHECK(y.size() == clean.size());
    CHECK(std::abs(snr_db(clean, y) - snr) <= 0.1);
  }
  SUBCASE("noiseless identity channel") {
    CHECK(make_measurement(x, {1.0}, kNoiselessSnr, 4) == x);
  }
  SUBCASE("fixed seed is reproducible") {
    CHECK(make_measurement(x, k, 10.0, 4) == make_measurement(x, k, 10.0, 4));
    CHECK(make_measurement(x, k, 10.0, 4) != make_measurement(x, k, 10.0, 5));
  }
  CHECK_THROWS_AS(make_measurement(x, k, NAN, 4), DomainError);
}

TEST_CASE("synthesis is deterministic per seed") {
  RirSpec a, b;
  a.seed = b.seed = 21;
  CHECK(synth_rir(a) == synth_rir(b));
  b.seed = 22;
  CHECK(synth_rir(a) != synth_rir(b));
}

}  // TEST_SUITE

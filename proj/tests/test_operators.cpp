// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>

#include "doctest.h"
#include "dps/errors.h"
#include "dps/operators.h"
#include "test_util.h"

using namespace dps;

namespace {

TimeSignal direct_convolution(const TimeSignal& k, const TimeSignal& x) {
  TimeSignal out(k.size() + x.size() - 1, 0.0);
  for (size_t i = 0; i < x.size(); ++i)
    for (size_t j = 0; j < k.size(); ++j) out[i + j] += k[j] * x[i];
  return out;
}

double max_abs_diff(const TimeSignal& a, const TimeSignal& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Directional derivative of f at x along d by central differences.
template <typename F>
double central_difference(F&& f, const Spectrogram& x, const Spectrogram& d, double h) {
  Spectrogram xp = x, xm = x;
  xp.axpy(h, d);
  xm.axpy(-h, d);
  return (f(xp) - f(xm)) / (2.0 * h);
}

// Model small enough for exhaustive checks.
struct Small {
  test::CfgPtr cfg = test::cfg(16, 4, 16);
  int len = 60;
  std::mt19937_64 rng{11};
  TimeSignal k = test::randn(9, rng, 0.5);
  MeasurementModel model{k, 0.0, cfg, len};
};

}  // namespace

TEST_SUITE("operators") {

TEST_CASE("unit kernel and unit delay") {
  std::mt19937_64 rng(1);
  const TimeSignal x = test::randn(100, rng);
  CHECK(convolve({1.0}, x) == x);
  const TimeSignal d = convolve({0.0, 1.0}, x);
  REQUIRE(d.size() == 101u);
  CHECK(d[0] == 0.0);
  for (int n = 0; n < 100; ++n) CHECK(d[n + 1] == x[n]);
}

TEST_CASE("FFT convolution matches the direct sum") {
  std::mt19937_64 rng(2);
  for (auto [kl, xl] : {std::pair{37, 211}, std::pair{300, 1000}, std::pair{17, 17},
                        std::pair{4000, 16000}}) {
    const TimeSignal k = test::randn(kl, rng), x = test::randn(xl, rng);
    const TimeSignal ref = direct_convolution(k, x);
    const TimeSignal got = convolve(k, x);
    REQUIRE(got.size() == ref.size());
    double scale = 0.0;
    for (double v : ref) scale = std::max(scale, std::abs(v));
    CHECK(max_abs_diff(got, ref) <= 1e-10 * scale);
  }
  CHECK_THROWS_AS(convolve({}, {1.0}), DomainError);
}

TEST_CASE("convolution adjoint") {
  std::mt19937_64 rng(3);
  SUBCASE("unit kernel is the identity") {
    const TimeSignal r = test::randn(50, rng);
    CHECK(convolve_adjoint({1.0}, r) == r);
  }
  SUBCASE("delay becomes an advance") {
    const TimeSignal r = test::randn(51, rng);
    const TimeSignal a = convolve_adjoint({0.0, 1.0}, r);
    REQUIRE(a.size() == 50u);
    for (int n = 0; n < 50; ++n) CHECK(a[n] == r[n + 1]);
  }
  SUBCASE("inner product identity") {
    for (auto [kl, xl] : {std::pair{5, 40}, std::pair{37, 211}, std::pair{800, 3000}}) {
      const TimeSignal k = test::randn(kl, rng), x = test::randn(xl, rng);
      const TimeSignal r = test::randn(kl + xl - 1, rng);
      const double lhs = dot(convolve(k, x), r);
      const double rhs = dot(x, convolve_adjoint(k, r));
      CHECK(std::abs(lhs - rhs) <= 1e-10 * std::abs(lhs));
    }
  }
  CHECK_THROWS_AS(convolve_adjoint({1.0, 2.0, 3.0}, {1.0, 2.0}), ContractViolation);
}

TEST_CASE("measurement model forward and adjoint") {
  Small s;
  std::mt19937_64 rng(4);
  CHECK(s.model.measurement_len() == 68);
  CHECK(s.model.frames() == s.cfg->num_frames(60));
  const Spectrogram x1 = test::randn_spec(s.cfg, s.model.frames(), 60, rng);
  const Spectrogram x2 = test::randn_spec(s.cfg, s.model.frames(), 60, rng);

  SUBCASE("zero state gives zero output") {
    for (double v : s.model.forward(s.model.zero_state())) CHECK(v == 0.0);
  }
  SUBCASE("linearity") {
    const TimeSignal lhs = s.model.forward(2.0 * x1 + (-3.0) * x2);
    TimeSignal rhs = s.model.forward(x1);
    const TimeSignal b = s.model.forward(x2);
    for (size_t i = 0; i < rhs.size(); ++i) rhs[i] = 2.0 * rhs[i] - 3.0 * b[i];
    CHECK(test::rel_l2(lhs, rhs) <= 1e-12);
  }
  SUBCASE("delta RIR reduces to synthesis") {
    const MeasurementModel m({1.0}, 0.0, s.cfg, 60);
    CHECK(m.forward(x1) == istft(x1));
  }
  SUBCASE("adjoint identity") {
    const TimeSignal r = test::randn(68, rng);
    const double lhs = dot(s.model.forward(x1), r);
    const double rhs = x1.dot(s.model.adjoint(r));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::abs(lhs));
  }
  SUBCASE("shape checks") {
    CHECK_THROWS_AS(s.model.adjoint(TimeSignal(67)), ContractViolation);
    const Spectrogram wrong = test::randn_spec(s.cfg, s.model.frames(), 59, rng);
    CHECK_THROWS_AS(s.model.forward(wrong), ContractViolation);
    CHECK_THROWS_AS(MeasurementModel({}, 0.0, s.cfg, 60), ContractViolation);
    CHECK_THROWS_AS(MeasurementModel({1.0}, -1.0, s.cfg, 60), ContractViolation);
    CHECK_THROWS_AS(MeasurementModel({1.0}, 0.0, s.cfg, 0), ContractViolation);
  }
}

TEST_CASE("state loss and gradient") {
  Small s;
  std::mt19937_64 rng(5);
  const Spectrogram x = test::randn_spec(s.cfg, s.model.frames(), 60, rng);

  SUBCASE("exact fit has zero loss and gradient") {
    const LossGrad lg = loss_and_grad_state(s.model, x, s.model.forward(x));
    CHECK(lg.loss <= 1e-24);
    CHECK(lg.grad.norm() <= 1e-10);
  }
  SUBCASE("gradient scales with a joint rescaling") {
    const TimeSignal y = test::randn(68, rng);
    const LossGrad a = loss_and_grad_state(s.model, x, y);
    TimeSignal y3 = y;
    for (double& v : y3) v *= 3.0;
    const LossGrad b = loss_and_grad_state(s.model, 3.0 * x, y3);
    CHECK(test::rel_l2(b.grad, 3.0 * a.grad) <= 1e-12);
    CHECK(b.loss == doctest::Approx(9.0 * a.loss).epsilon(1e-12));
    CHECK(a.residual == doctest::Approx(std::sqrt(a.loss)));
  }
  SUBCASE("finite differences") {
    const TimeSignal y = test::randn(68, rng);
    const LossGrad lg = loss_and_grad_state(s.model, x, y);
    auto f = [&](const Spectrogram& z) { return loss_and_grad_state(s.model, z, y).loss; };
    for (int trial = 0; trial < 5; ++trial) {
      const Spectrogram d = test::randn_spec(s.cfg, s.model.frames(), 60, rng);
      const double fd = central_difference(f, x, d, 1e-5);
      CHECK(fd == doctest::Approx(lg.grad.dot(d)).epsilon(1e-7));
    }
  }
  SUBCASE("wrong measurement length") {
    CHECK_THROWS_AS(loss_and_grad_state(s.model, x, TimeSignal(67)), ContractViolation);
  }
}

TEST_CASE("Tweedie-based loss and gradient") {
  Small s;
  std::mt19937_64 rng(6);
  const DiffusionSchedule sched;
  const int frames = s.model.frames();
  const Spectrogram x = test::randn_spec(s.cfg, frames, 60, rng, 0.3);
  const TimeSignal y = test::randn(68, rng);

  SUBCASE("zero score reduces to the state loss") {
    ZeroScore zero;
    for (auto mode : {JacobianMode::kIdentity, JacobianMode::kExact}) {
      const LossGrad a = loss_and_grad_dps(s.model, sched, x, 0.7, zero, y, mode,
                                           TweedieMode::kPaper);
      const LossGrad b = loss_and_grad_state(s.model, x, y);
      CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-14));
      CHECK(test::rel_l2(a.grad, b.grad) <= 1e-14);
    }
  }
  SUBCASE("delta prior with exact Tweedie is insensitive to the state") {
    const Spectrogram target = test::randn_spec(s.cfg, frames, 60, rng);
    DeltaScore delta(DeltaPrior{target}, VarianceConvention{TweedieMode::kExact, 0.05});
    const LossGrad lg = loss_and_grad_dps(s.model, sched, x, 0.6, delta, y,
                                          JacobianMode::kExact, TweedieMode::kExact);
    CHECK(lg.grad.norm() <= 1e-9 * (1.0 + lg.residual));
    const LossGrad at_target = loss_and_grad_state(s.model, target, y);
    CHECK(lg.loss == doctest::Approx(at_target.loss).epsilon(1e-10));
  }
  SUBCASE("exact Jacobian matches finite differences") {
    Spectrogram mean = test::randn_spec(s.cfg, frames, 60, rng, 0.5);
    std::vector<double> var(mean.size());
    std::uniform_real_distribution<double> u(0.05, 1.5);
    for (double& v : var) v = u(rng);
    GaussianScore gauss(GaussianPrior{mean, var});
    for (auto tmode : {TweedieMode::kPaper, TweedieMode::kExact}) {
      const double tau = 0.45;
      const LossGrad lg = loss_and_grad_dps(s.model, sched, x, tau, gauss, y,
                                            JacobianMode::kExact, tmode);
      auto f = [&](const Spectrogram& z) {
        return loss_and_grad_dps(s.model, sched, z, tau, gauss, y,
                                 JacobianMode::kIdentity, tmode)
            .loss;
      };
      for (int trial = 0; trial < 5; ++trial) {
        const Spectrogram d = test::randn_spec(s.cfg, frames, 60, rng);
        CHECK(central_difference(f, x, d, 1e-5) ==
              doctest::Approx(lg.grad.dot(d)).epsilon(1e-6));
      }
    }
  }
  SUBCASE("precomputed score is used as given") {
    Spectrogram mean = test::randn_spec(s.cfg, frames, 60, rng, 0.5);
    GaussianScore gauss(GaussianPrior{mean, {0.4}});
    const Spectrogram sc = gauss.score(x, sched.noise_level(0.3));
    const LossGrad a = loss_and_grad_dps(s.model, sched, x, 0.3, gauss, y,
                                         JacobianMode::kIdentity, TweedieMode::kPaper);
    const LossGrad b = loss_and_grad_dps(s.model, sched, x, 0.3, gauss, y,
                                         JacobianMode::kIdentity, TweedieMode::kPaper, &sc);
    CHECK(a.loss == b.loss);
    CHECK(test::rel_l2(a.grad, b.grad) == 0.0);
  }
  SUBCASE("exact Jacobian needs JVP support") {
    GmmPrior gmm{{GmmComponent{1.0, x.zeros_like(), 1.0}}};
    GmmScore score(gmm);
    CHECK_THROWS_AS(loss_and_grad_dps(s.model, sched, x, 0.5, score, y,
                                      JacobianMode::kExact, TweedieMode::kPaper),
                    CapabilityError);
    CHECK_NOTHROW(loss_and_grad_dps(s.model, sched, x, 0.5, score, y,
                                    JacobianMode::kIdentity, TweedieMode::kPaper));
  }
}

}  // TEST_SUITE

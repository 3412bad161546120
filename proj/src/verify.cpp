// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dps/verify.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <numbers>
#include <random>

#include "dps/diffusion.h"
#include "dps/errors.h"
#include "dps/metrics.h"
#include "dps/operators.h"
#include "dps/oracle.h"
#include "dps/rir.h"
#include "dps/sampler.h"
#include "dps/score.h"

namespace dps::verify {

namespace {

using Clock = std::chrono::steady_clock;
using Checks = std::vector<CheckResult>;
using CfgPtr = std::shared_ptr<const StftConfig>;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename... Args>
std::string format(const char* fmt, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

CheckResult check(std::string name, bool passed, std::string detail,
                  double seconds = 0.0) {
  return {std::move(name), passed, std::move(detail), seconds};
}

CfgPtr make_cfg(int wlen, int hop, int fft) {
  return std::make_shared<const StftConfig>(StftConfig::sqrt_hann(wlen, hop, fft));
}

CfgPtr default_cfg() {
  return std::make_shared<const StftConfig>(StftConfig::speech_default());
}

TimeSignal random_signal(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  TimeSignal x(n);
  for (double& v : x) v = normal(rng);
  return x;
}

Spectrogram random_spec(const CfgPtr& cfg, int frames, int len,
                        std::mt19937_64& rng, double scale = 1.0) {
  Spectrogram x(cfg, frames, len);
  std::normal_distribution<double> normal;
  for (int i = 0; i < x.size(); ++i)
    x[i] = scale * Complex(normal(rng), normal(rng));
  return x;
}

// Coordinate c of R^{2D}: bin c / 2, real part for even c.
double& coord(Spectrogram& x, int c) {
  return reinterpret_cast<double(&)[2]>(x[c / 2])[c % 2];
}
double coord(const Spectrogram& x, int c) {
  return c % 2 ? x[c / 2].imag() : x[c / 2].real();
}

// Central differences of f at x along the listed coordinates.
std::vector<double> central_diff(const std::function<double(const Spectrogram&)>& f,
                                 const Spectrogram& x,
                                 const std::vector<int>& coords, double h) {
  std::vector<double> out;
  Spectrogram xp = x;
  for (int c : coords) {
    const double orig = coord(xp, c);
    coord(xp, c) = orig + h;
    const double fp = f(xp);
    coord(xp, c) = orig - h;
    const double fm = f(xp);
    coord(xp, c) = orig;
    out.push_back((fp - fm) / (2 * h));
  }
  return out;
}

double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

std::vector<int> pick_coords(int dims, int count, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, dims - 1);
  std::vector<int> out(count);
  for (int& c : out) c = pick(rng);
  return out;
}

double normal_quantile(double p) {
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::numbers::sqrt2) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double empirical_quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p * (v.size() - 1);
  const size_t i = static_cast<size_t>(pos);
  const double frac = pos - i;
  return i + 1 < v.size() ? v[i] * (1 - frac) + v[i + 1] * frac : v[i];
}

// ---------------------------------------------------------------- adjoint

Checks adjoint_suite() {
  struct Shape {
    int wlen, hop, fft, len, taps;
  };
  const Shape shapes[] = {{8, 2, 8, 1, 1},
                          {16, 4, 16, 50, 7},
                          {64, 16, 64, 200, 1000},
                          {510, 128, 512, 1000, 300},
                          {510, 128, 512, 16000, 8000}};
  std::mt19937_64 rng(11);
  Checks out;
  const auto t0 = Clock::now();
  double worst = 0.0;
  int trials = 0;
  for (const Shape& s : shapes) {
    const CfgPtr cfg = make_cfg(s.wlen, s.hop, s.fft);
    for (int trial = 0; trial < 20; ++trial, ++trials) {
      MeasurementModel model(random_signal(s.taps, rng), 0.0, cfg, s.len);
      const Spectrogram x = random_spec(cfg, model.frames(), s.len, rng);
      const TimeSignal r = random_signal(model.measurement_len(), rng);
      const double lhs = dot(model.forward(x), r);
      const double rhs = x.dot(model.adjoint(r));
      worst = std::max(worst, std::abs(lhs - rhs) /
                                  std::max(std::abs(lhs), std::abs(rhs)));
    }
  }
  const double secs = seconds_since(t0);
  out.push_back(check("adjoint.conv_istft", worst <= 1e-10,
                      format("%d trials over 5 shapes, max rel error %.3g "
                             "(limit 1e-10)", trials, worst),
                      secs));
  out.push_back(check("adjoint.runtime", secs < 10.0,
                      format("%.3f s (limit 10 s)", secs)));

  // The two factors on their own.
  double worst_istft = 0.0, worst_conv = 0.0;
  for (const Shape& s : shapes) {
    const CfgPtr cfg = make_cfg(s.wlen, s.hop, s.fft);
    const int frames = cfg->num_frames(s.len);
    const Spectrogram x = random_spec(cfg, frames, s.len, rng);
    const TimeSignal u = random_signal(s.len, rng);
    const double a = dot(istft(x), u), b = x.dot(istft_adjoint(u, cfg, frames));
    worst_istft = std::max(worst_istft, std::abs(a - b) / std::abs(a));
    const TimeSignal k = random_signal(s.taps, rng);
    const TimeSignal r = random_signal(s.len + s.taps - 1, rng);
    const double c = dot(convolve(k, u), r), d = dot(u, convolve_adjoint(k, r));
    worst_conv = std::max(worst_conv, std::abs(c - d) / std::abs(c));
  }
  out.push_back(check("adjoint.istft", worst_istft <= 1e-10,
                      format("max rel error %.3g", worst_istft)));
  out.push_back(check("adjoint.convolution", worst_conv <= 1e-10,
                      format("max rel error %.3g", worst_conv)));
  return out;
}

// ------------------------------------------------------------------- stft

Checks stft_suite() {
  Checks out;
  std::mt19937_64 rng(12);
  const CfgPtr cfg = default_cfg();
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string per_len;
  for (int len : {1, 127, 128, 510, 16000, 80000}) {
    const TimeSignal x = random_signal(len, rng);
    TimeSignal back = istft(stft(x, cfg));
    for (int i = 0; i < len; ++i) back[i] -= x[i];
    const double rel = norm(back) / norm(x);
    worst = std::max(worst, rel);
    per_len += format(" L=%d:%.2g", len, rel);
  }
  const double secs = seconds_since(t0);
  out.push_back(check("stft.reconstruction", worst <= 1e-8,
                      format("max rel L2 %.3g (limit 1e-8);", worst) + per_len,
                      secs));
  out.push_back(check("stft.runtime", secs < 5.0,
                      format("%.3f s (limit 5 s)", secs)));

  // Energy bookkeeping: exact against the accumulated window, and constant
  // for a tight frame.
  const TimeSignal x = random_signal(4000, rng);
  double weighted = 0.0;
  for (int n = 0; n < 4000; ++n) weighted += cfg->overlap_norm(n) * x[n] * x[n];
  const double e = two_sided_energy(stft(x, cfg));
  const double err = std::abs(e - cfg->fft_len * weighted) / e;
  out.push_back(check("stft.energy_identity", err <= 1e-10,
                      format("rel error %.3g; default window ripple %.3g",
                             err, cfg->overlap_ripple())));

  const CfgPtr tight = make_cfg(512, 128, 512);
  double lo = INFINITY, hi = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const TimeSignal u = random_signal(3000 + 17 * trial, rng);
    const double ratio = two_sided_energy(stft(u, tight)) / dot(u, u);
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  out.push_back(check("stft.tight_frame_energy", (hi - lo) / lo <= 1e-6,
                      format("energy ratio spread %.3g (limit 1e-6)",
                             (hi - lo) / lo)));
  return out;
}

// --------------------------------------------------------------- gradient

Checks gradient_suite() {
  Checks out;
  std::mt19937_64 rng(13);
  const CfgPtr cfg = make_cfg(32, 8, 32);
  const int len = 120, taps = 25, coords = 20, instances = 10;
  const double h = 1e-6;
  const DiffusionSchedule sched;
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  const auto t0 = Clock::now();

  double worst_state = 0, worst_ident = 0, worst_exact = 0;
  int descent_ok = 0;
  for (int inst = 0; inst < instances; ++inst) {
    MeasurementModel model(random_signal(taps, rng), 0.0, cfg, len);
    const Spectrogram x = random_spec(cfg, model.frames(), len, rng);
    const TimeSignal y = random_signal(model.measurement_len(), rng);
    const std::vector<int> cs = pick_coords(2 * x.size(), coords, rng);
    auto pick = [&](const Spectrogram& g) {
      std::vector<double> v;
      for (int c : cs) v.push_back(coord(g, c));
      return v;
    };
    auto state_loss = [&](const Spectrogram& z) {
      return loss_and_grad_state(model, z, y).loss;
    };

    const LossGrad st = loss_and_grad_state(model, x, y);
    worst_state = std::max(
        worst_state, rel_error(central_diff(state_loss, x, cs, h), pick(st.grad)));

    GaussianPrior prior{random_spec(cfg, model.frames(), len, rng, 0.5), {}};
    for (int i = 0; i < x.size(); ++i) prior.var.push_back(unif(rng) + 0.2);
    const TweedieMode mode = inst % 2 ? TweedieMode::kExact : TweedieMode::kPaper;
    GaussianScore provider(prior, {mode, sched.sigma_min()});
    const double tau = unif(rng);

    // Identity Jacobian: the gradient of the loss at the Tweedie estimate.
    const LossGrad id = loss_and_grad_dps(model, sched, x, tau, provider, y,
                                          JacobianMode::kIdentity, mode);
    const Spectrogram x0 = tweedie_denoise(
        sched, x, tau, provider.score(x, sched.noise_level(tau)), mode);
    worst_ident = std::max(
        worst_ident, rel_error(central_diff(state_loss, x0, cs, h), pick(id.grad)));

    // Exact Jacobian: the full derivative through the score.
    const LossGrad ex = loss_and_grad_dps(model, sched, x, tau, provider, y,
                                          JacobianMode::kExact, mode);
    auto dps_loss = [&](const Spectrogram& z) {
      return loss_and_grad_dps(model, sched, z, tau, provider, y,
                               JacobianMode::kIdentity, mode)
          .loss;
    };
    worst_exact = std::max(
        worst_exact, rel_error(central_diff(dps_loss, x, cs, h), pick(ex.grad)));

    // A short step against the gradient lowers the loss.
    const double alpha = 1e-3 * x.norm() / st.grad.norm();
    Spectrogram moved = x;
    moved.axpy(-alpha, st.grad);
    if (state_loss(moved) < st.loss) ++descent_ok;
  }
  const double secs = seconds_since(t0);
  auto line = [&](double worst) {
    return format("%d instances x %d coords, h=1e-6, max rel %.3g (limit 1e-5)",
                  instances, coords, worst);
  };
  out.push_back(check("gradient.statedps", worst_state <= 1e-5, line(worst_state)));
  out.push_back(check("gradient.dps_identity", worst_ident <= 1e-5, line(worst_ident)));
  out.push_back(check("gradient.dps_exact_jacobian", worst_exact <= 1e-5,
                      line(worst_exact)));
  out.push_back(check("gradient.descent", descent_ok == instances,
                      format("%d/%d instances decreased", descent_ok, instances)));
  out.push_back(check("gradient.runtime", secs < 30.0,
                      format("%.3f s (limit 30 s)", secs), secs));
  return out;
}

// ------------------------------------------------------------------ score

// Conjugate Wirtinger derivative from central differences of log p.
Spectrogram fd_score(const std::function<double(const Spectrogram&)>& logp,
                     const Spectrogram& x, double h) {
  std::vector<int> all(2 * x.size());
  for (int i = 0; i < 2 * x.size(); ++i) all[i] = i;
  const std::vector<double> d = central_diff(logp, x, all, h);
  Spectrogram s = x.zeros_like();
  for (int i = 0; i < x.size(); ++i) s[i] = 0.5 * Complex(d[2 * i], d[2 * i + 1]);
  return s;
}

double spec_rel(const Spectrogram& a, const Spectrogram& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

Checks score_suite() {
  Checks out;
  std::mt19937_64 rng(14);
  const CfgPtr cfg = make_cfg(8, 2, 8);
  const int frames = 5, len = 6;
  const double h = 1e-5;
  std::uniform_real_distribution<double> unif(0.2, 1.5);

  struct Case {
    std::string name;
    std::unique_ptr<ScoreProvider> provider;
    std::function<double(const Spectrogram&, double)> logp;
  };
  std::vector<Case> cases;
  for (TweedieMode mode : {TweedieMode::kPaper, TweedieMode::kExact}) {
    const VarianceConvention conv{mode, 0.05};
    const std::string tag = mode == TweedieMode::kPaper ? "paper" : "exact";

    auto g1 = std::make_unique<GaussianScore>(
        GaussianPrior{random_spec(cfg, frames, len, rng), {0.7}}, conv);
    auto* g1p = g1.get();
    cases.push_back({"gaussian_scalar_" + tag, std::move(g1),
                     [g1p](const Spectrogram& x, double s) {
                       return g1p->log_density(x, s);
                     }});

    GaussianPrior per_bin{random_spec(cfg, frames, len, rng), {}};
    for (int i = 0; i < per_bin.mean.size(); ++i) per_bin.var.push_back(unif(rng));
    auto g2 = std::make_unique<GaussianScore>(per_bin, conv);
    auto* g2p = g2.get();
    cases.push_back({"gaussian_per_bin_" + tag, std::move(g2),
                     [g2p](const Spectrogram& x, double s) {
                       return g2p->log_density(x, s);
                     }});

    GmmPrior gmm;
    for (int c = 0; c < 3; ++c)
      gmm.components.push_back(
          {(c + 1) / 6.0, random_spec(cfg, frames, len, rng, 0.3), unif(rng)});
    auto m = std::make_unique<GmmScore>(gmm, conv);
    auto* mp = m.get();
    cases.push_back({"gmm_" + tag, std::move(m),
                     [mp](const Spectrogram& x, double s) {
                       return mp->log_density(x, s);
                     }});

    auto d = std::make_unique<DeltaScore>(
        DeltaPrior{random_spec(cfg, frames, len, rng)}, conv);
    auto* dp = d.get();
    cases.push_back({"delta_" + tag, std::move(d),
                     [dp](const Spectrogram& x, double s) {
                       return dp->log_density(x, s);
                     }});
  }

  double worst_score = 0.0, worst_jvp = 0.0;
  std::string detail;
  for (Case& c : cases) {
    for (double sigma : {0.08, 0.2, 0.5}) {
      const Spectrogram x = random_spec(cfg, frames, len, rng);
      auto logp = [&](const Spectrogram& z) { return c.logp(z, sigma); };
      const double rel = spec_rel(c.provider->score(x, sigma), fd_score(logp, x, h));
      if (rel > worst_score) detail = c.name;
      worst_score = std::max(worst_score, rel);
      if (c.provider->supports_jvp()) {
        const Spectrogram u = random_spec(cfg, frames, len, rng);
        Spectrogram xp = x, xm = x;
        xp.axpy(h, u);
        xm.axpy(-h, u);
        Spectrogram fd = c.provider->score(xp, sigma) - c.provider->score(xm, sigma);
        fd *= 1.0 / (2 * h);
        worst_jvp = std::max(worst_jvp, spec_rel(c.provider->jvp(x, sigma, u), fd));
      }
    }
  }
  out.push_back(check("score.fd_log_density", worst_score <= 1e-6,
                      format("%zu providers x 3 sigmas, max rel %.3g (limit "
                             "1e-6), worst %s",
                             cases.size(), worst_score, detail.c_str())));
  out.push_back(check("score.fd_jvp", worst_jvp <= 1e-6,
                      format("max rel %.3g (limit 1e-6)", worst_jvp)));
  return out;
}

// --------------------------------------------------------------- langevin

Checks langevin_suite() {
  Checks out;
  std::mt19937_64 rng(15);
  const CfgPtr cfg = default_cfg();
  const int frames = 40;  // 257 * 40 = 10280 bins
  const DiffusionSchedule sched;
  const double prior_var = 1.0, tau = 1.0, r = 0.4;
  const VarianceConvention conv{TweedieMode::kExact, sched.sigma_min()};
  const Spectrogram mean = random_spec(cfg, frames, 1, rng, std::sqrt(0.5));
  GaussianScore provider(GaussianPrior{mean, {prior_var}}, conv);
  const double sigma = sched.noise_level(tau);
  const double target = prior_var + conv.variance(sigma);

  auto run_chain = [&](Spectrogram x) {
    for (int step = 0; step < 200; ++step)
      x = corrector_step(x, tau, provider, r, rng, sched);
    double acc = 0.0;
    for (int i = 0; i < x.size(); ++i) acc += std::norm(x[i] - mean[i]);
    return acc / x.size();
  };
  const auto t0 = Clock::now();
  Spectrogram far = mean;
  for (Complex& v : far.data()) v += Complex(3.0, -2.0);
  const double from_far = run_chain(far);
  Spectrogram stationary = mean;
  add_complex_noise(stationary, target, rng);
  const double from_stationary = run_chain(stationary);
  const double secs = seconds_since(t0);

  for (auto [name, got] : {std::pair{"langevin.from_offset", from_far},
                           std::pair{"langevin.from_stationary", from_stationary}}) {
    const double rel = std::abs(got - target) / target;
    out.push_back(check(name, rel <= 0.05,
                        format("%d bins, 200 steps r=0.4 sigma=%.3g: variance "
                               "%.4f vs %.4f, rel %.3g (limit 0.05)",
                               mean.size(), sigma, got, target, rel),
                        secs / 2));
  }
  return out;
}

// ------------------------------------------------------------------- flow

Checks flow_suite() {
  Checks out;
  std::mt19937_64 rng(16);
  const CfgPtr cfg = default_cfg();
  const int frames = 40;
  const DiffusionSchedule sched;
  const VarianceConvention conv{TweedieMode::kExact, sched.sigma_min()};
  const Complex mu(0.3, -0.2);
  const double prior_var = 0.5;
  Spectrogram mean(cfg, frames, 1);
  for (Complex& v : mean.data()) v = mu;
  GaussianScore provider(GaussianPrior{mean, {prior_var}}, conv);

  const auto t0 = Clock::now();
  // Stratified draw of the terminal marginal: every run starts at its own
  // quantile, so the decile error measures transport, not sampling noise.
  Spectrogram x = mean;
  const int runs = x.size();
  const double start_sd = std::sqrt((prior_var + sched.perturbation_variance(1.0)) / 2);
  std::vector<double> strata(runs);
  for (int i = 0; i < runs; ++i) strata[i] = normal_quantile((i + 0.5) / runs);
  std::vector<double> shuffled = strata;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  for (int i = 0; i < runs; ++i)
    x[i] += start_sd * Complex(strata[i], shuffled[i]);
  const int n_steps = 1000;
  const double dtau = -1.0 / n_steps;
  for (int n = n_steps; n >= 1; --n)
    x = predictor_step(x, n * 1.0 / n_steps, provider, dtau, sched);
  const double secs = seconds_since(t0);

  // Real and imaginary parts are independent draws of N(mu, prior_var / 2).
  const double sd = std::sqrt(prior_var / 2);
  std::vector<double> z;
  for (const Complex& v : x.data()) {
    z.push_back((v.real() - mu.real()) / sd);
    z.push_back((v.imag() - mu.imag()) / sd);
  }
  double worst = 0.0;
  for (int d = 1; d <= 9; ++d) {
    const double p = d / 10.0;
    worst = std::max(worst, std::abs(empirical_quantile(z, p) - normal_quantile(p)));
  }
  out.push_back(check("flow.terminal_deciles", worst <= 0.03,
                      format("%d runs, 1000 steps: max decile error %.4f prior "
                             "sd (limit 0.03)",
                             x.size(), worst),
                      secs));
  out.push_back(check("flow.runtime", secs < 60.0, format("%.3f s (limit 60 s)", secs)));

  // One step of size h against two of size h/2: the gap shrinks ~4x per halving.
  Spectrogram x0(cfg, frames, 1);
  for (int i = 0; i < x0.size(); ++i) x0[i] = mu + Complex(1.0 + 0.01 * i, -0.5);
  auto gap = [&](double h) {
    const double tau = 0.6;
    const Spectrogram one = predictor_step(x0, tau, provider, -h, sched);
    const Spectrogram half = predictor_step(x0, tau, provider, -h / 2, sched);
    const Spectrogram two = predictor_step(half, tau - h / 2, provider, -h / 2, sched);
    return (one - two).norm();
  };
  const double g1 = gap(0.1), g2 = gap(0.05), g3 = gap(0.025);
  const double r1 = g1 / g2, r2 = g2 / g3;
  const bool order_ok = std::abs(r1 - 4) < 0.5 && std::abs(r2 - 4) < 0.5;
  out.push_back(check("flow.euler_order", order_ok,
                      format("halving ratios %.3f, %.3f (expected ~4)", r1, r2)));
  return out;
}

// ------------------------------------------------------- posterior-oracle

struct OracleOutcome {
  double rel = 0.0;
  double mean_residual = 0.0;
  int dims = 0;
};

OracleOutcome posterior_oracle_run(int seeds) {
  std::mt19937_64 rng(17);
  const CfgPtr cfg = make_cfg(4, 2, 4);
  const int len = 2;
  const TimeSignal k = {0.5, -0.25};
  const double prior_var = 0.25, eta = 1e-3;
  MeasurementModel model(k, eta, cfg, len);
  const Spectrogram zero = model.zero_state();
  GaussianScore provider(GaussianPrior{zero, {prior_var}});

  const TimeSignal y = {1.0, -0.4, 0.3};
  const Eigen::MatrixXd a = oracle::densify_measurement(model);
  const Eigen::VectorXd prior_mean = Eigen::VectorXd::Zero(a.cols());
  const Eigen::VectorXd prior_diag = Eigen::VectorXd::Constant(a.cols(), prior_var / 2);
  const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), y.size());
  const oracle::GaussianPosterior post =
      oracle::gaussian_posterior(prior_mean, prior_diag, a, eta, yv);

  SamplerConfig sc;
  Eigen::VectorXd avg = Eigen::VectorXd::Zero(a.cols());
  double res = 0.0;
  for (int seed = 0; seed < seeds; ++seed) {
    sc.seed = seed;
    std::mt19937_64 srng(sc.seed);
    Spectrogram x = zero;
    add_complex_noise(x, 1.0, srng);
    const SampleResult r = run_from(x, model, y, provider, sc, srng);
    avg += oracle::to_real(r.estimate);
    res += r.per_step_residuals.back();
  }
  avg /= seeds;
  (void)rng;
  return {(avg - post.mean).norm() / post.mean.norm(), res / seeds, zero.size()};
}

Checks posterior_oracle_suite() {
  const auto t0 = Clock::now();
  const OracleOutcome o = posterior_oracle_run(100);
  return {check("posterior-oracle.mean", o.rel <= 0.10,
                format("%d bins, DPS N=50, 100 seeds: rel L2 to oracle mean "
                       "%.4f (limit 0.10)",
                       o.dims, o.rel),
                seconds_since(t0))};
}

// --------------------------------------------------------------- pipeline

struct PipelineOutcome {
  double si_sdr = 0.0;
  double residual_db = 0.0;
  double seconds = 0.0;
  double measurement_norm = 0.0;  // ||y|| after normalization
  SampleResult result;
};

PipelineOutcome pipeline_run(double snr, std::uint64_t seed, int len = 16000,
                             LikelihoodVariant variant = LikelihoodVariant::kDps) {
  const TimeSignal x = speech_like(len, 16000.0, seed);
  RirSpec spec;
  spec.t60 = 0.5;
  spec.seed = seed + 1;
  const TimeSignal k = synth_rir(spec);
  const TimeSignal y = make_measurement(x, k, snr, seed + 2);

  const auto t0 = Clock::now();
  SamplerConfig cfg;
  cfg.seed = seed;
  cfg.variant = variant;
  const Normalization norm = normalization_for(y, k, cfg.normalize);
  TimeSignal scaled = x;
  for (double& v : scaled) v *= norm.signal_gain();
  DeltaScore provider(DeltaPrior{stft(scaled, default_cfg())});
  PipelineOutcome out;
  out.result = run(y, k, provider, cfg);
  out.seconds = seconds_since(t0);
  out.si_sdr = si_sdr(out.result.waveform, x);
  out.residual_db = residual_consistency(y, k, out.result.waveform);
  out.measurement_norm = norm.y_gain * dps::norm(y);
  return out;
}

// Largest relative per-step rise over the final 20% of the trace. Rises that
// stay below `floor` in absolute terms are round-off and count as zero.
double worst_rise(const std::vector<double>& res, double floor, size_t* steps) {
  const size_t start = res.size() - res.size() / 5;
  *steps = res.size() - start;
  double worst = 0.0;
  for (size_t i = std::max<size_t>(start, 1); i < res.size(); ++i)
    if (res[i] - res[i - 1] > floor)
      worst = std::max(worst, res[i] / res[i - 1] - 1.0);
  return worst;
}

Checks pipeline_suite() {
  Checks out;
  const PipelineOutcome p = pipeline_run(kNoiselessSnr, 3);
  out.push_back(check("pipeline.si_sdr", p.si_sdr >= 30.0,
                      format("SI-SDR %.2f dB (limit >= 30)", p.si_sdr), p.seconds));
  out.push_back(check("pipeline.residual_consistency", p.residual_db <= -20.0,
                      format("%.2f dB (limit <= -20)", p.residual_db)));
  out.push_back(check("pipeline.runtime", p.seconds < 30.0,
                      format("%.3f s (limit 30 s)", p.seconds)));

  // With a delta prior the Tweedie estimate is the target itself, so the DPS
  // residual sits at the round-off floor.
  size_t steps = 0;
  const double floor = 1e-12 * p.measurement_norm;
  const double dps_rise = worst_rise(p.result.per_step_residuals, floor, &steps);
  out.push_back(check("pipeline.residual_trend", dps_rise <= 0.01,
                      format("max rise over the last %zu steps %.4f (limit 0.01, "
                             "round-off floor %.2g)",
                             steps, dps_rise, floor)));
  const PipelineOutcome s =
      pipeline_run(kNoiselessSnr, 3, 16000, LikelihoodVariant::kStateDps);
  const double state_rise = worst_rise(s.result.per_step_residuals, 0.0, &steps);
  out.push_back(check("pipeline.residual_trend_statedps", state_rise <= 0.01,
                      format("max rise over the last %zu steps %.4f (limit "
                             "0.01); SI-SDR %.2f dB",
                             steps, state_rise, s.si_sdr)));
  return out;
}

// --------------------------------------------------------------- schedule

Checks schedule_suite() {
  const DiffusionSchedule sched(0.05, 0.5, 1.0);
  const double z = zeta_prime(0.9, 2500.0, 0.9);
  const double s0 = sched.noise_level(0.0), s1 = sched.noise_level(1.0);
  return {check("schedule.zeta_apex", z == 2500.0, format("zeta'(0.9) = %.17g", z)),
          check("schedule.sigma_min", s0 == 0.05, format("sigma(0) = %.17g", s0)),
          check("schedule.sigma_max", s1 == 0.5, format("sigma(1) = %.17g", s1))};
}

// ------------------------------------------------------------- robustness

Checks robustness_suite() {
  const double snrs[] = {kNoiselessSnr, 20.0, 10.0, 0.0};
  std::vector<double> sdr;
  std::string detail;
  const auto t0 = Clock::now();
  for (double snr : snrs) {
    sdr.push_back(pipeline_run(snr, 5).si_sdr);
    detail += format(" %g dB:%.2f", snr, sdr.back());
  }
  bool monotone = true;
  for (size_t i = 1; i < sdr.size(); ++i) monotone &= sdr[i] <= sdr[i - 1];
  const double gap = sdr[0] - sdr[1];
  return {check("robustness.monotone", monotone,
                "SI-SDR by measurement SNR:" + detail, seconds_since(t0)),
          check("robustness.graceful", std::abs(gap) < 3.0,
                format("inf vs 20 dB gap %.2f dB (limit 3)", gap))};
}

// ------------------------------------------------------------ determinism

Checks determinism_suite() {
  const PipelineOutcome a = pipeline_run(20.0, 9, 4000);
  const PipelineOutcome b = pipeline_run(20.0, 9, 4000);
  const bool same = a.result.waveform == b.result.waveform &&
                    a.result.per_step_residuals == b.result.per_step_residuals &&
                    a.result.estimate.data() == b.result.estimate.data();
  return {check("determinism.sampler", same,
                same ? "bit-identical reruns" : "reruns differ")};
}

using SuiteFn = Checks (*)();
const std::vector<std::pair<std::string, SuiteFn>>& registry() {
  static const std::vector<std::pair<std::string, SuiteFn>> r = {
      {"adjoint", adjoint_suite},
      {"stft", stft_suite},
      {"gradient", gradient_suite},
      {"score", score_suite},
      {"langevin", langevin_suite},
      {"flow", flow_suite},
      {"posterior-oracle", posterior_oracle_suite},
      {"pipeline", pipeline_suite},
      {"schedule", schedule_suite},
      {"robustness", robustness_suite},
      {"determinism", determinism_suite},
  };
  return r;
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, fn] : registry()) n.push_back(name);
    return n;
  }();
  return names;
}

std::vector<CheckResult> run_suite(const std::string& name) {
  Checks out;
  for (const auto& [suite, fn] : registry()) {
    if (name != "all" && name != suite) continue;
    Checks part = fn();
    out.insert(out.end(), part.begin(), part.end());
  }
  if (out.empty()) throw ContractViolation("unknown verify suite '" + name + "'");
  return out;
}

TimeSignal speech_like(int len, double sample_rate, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal;
  TimeSignal x(len, 0.0);
  const double two_pi = 2.0 * std::numbers::pi;
  // Syllable-rate envelope, gliding pitch with a handful of harmonics.
  const double f0 = 110.0 + 60.0 * unif(rng);
  const double glide = 0.15 * (unif(rng) - 0.5);
  double phase = 0.0;
  for (int n = 0; n < len; ++n) {
    const double t = n / sample_rate;
    const double env = std::pow(std::sin(std::numbers::pi * 4.0 * t), 2);
    const double f = f0 * (1.0 + glide * std::sin(two_pi * 1.3 * t));
    phase += two_pi * f / sample_rate;
    double v = 0.0;
    for (int h = 1; h <= 12; ++h) v += std::sin(h * phase + 0.3 * h) / h;
    const double onset = std::exp(-std::fmod(t, 0.25) / 0.02);
    x[n] = env * v + 0.3 * onset * normal(rng);
  }
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  for (double& v : x) v *= 0.5 / peak;
  return x;
}

}  // namespace dps::verify

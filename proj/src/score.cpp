// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dps/score.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dps/errors.h"

namespace dps {

namespace {

double log_sum_exp(const std::vector<double>& a) {
  const double hi = *std::max_element(a.begin(), a.end());
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double v : a) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

}  // namespace

Spectrogram ScoreProvider::jvp(const Spectrogram&, double,
                               const Spectrogram&) {
  throw CapabilityError("score provider '" + describe() +
                        "' does not support Jacobian-vector products");
}

double VarianceConvention::variance(double sigma) const {
  if (!(sigma >= 0.0)) throw DomainError("noise level must be nonnegative");
  if (mode == TweedieMode::kPaper) return sigma * sigma;
  return sigma * sigma - sigma_min * sigma_min;
}

void GaussianPrior::validate() const {
  if (var.size() != 1 && static_cast<int>(var.size()) != mean.size())
    throw ContractViolation("GaussianPrior: var must be scalar or per-bin");
  for (double v : var)
    if (!(v > 0.0)) throw DomainError("GaussianPrior: var must be positive");
}

void GmmPrior::validate() const {
  if (components.empty())
    throw ContractViolation("GmmPrior: no components");
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.weight > 0.0)) throw DomainError("GmmPrior: weights must be > 0");
    if (!(c.var > 0.0)) throw DomainError("GmmPrior: var must be positive");
    c.mean.require_same_shape(components.front().mean, "GmmPrior");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw DomainError("GmmPrior: weights must sum to 1");
}

GaussianScore::GaussianScore(GaussianPrior prior, VarianceConvention conv)
    : prior_(std::move(prior)), conv_(conv) {
  prior_.validate();
}

Spectrogram GaussianScore::score(const Spectrogram& x, double sigma) {
  x.require_same_shape(prior_.mean, "gaussian score");
  const double v = conv_.variance(sigma);
  Spectrogram out = x.zeros_like();
  for (int i = 0; i < x.size(); ++i)
    out[i] = (prior_.mean[i] - x[i]) / (prior_.var_at(i) + v);
  return out;
}

Spectrogram GaussianScore::jvp(const Spectrogram& x, double sigma,
                               const Spectrogram& direction) {
  x.require_same_shape(prior_.mean, "gaussian jvp");
  x.require_same_shape(direction, "gaussian jvp");
  const double v = conv_.variance(sigma);
  Spectrogram out = x.zeros_like();
  for (int i = 0; i < x.size(); ++i)
    out[i] = -direction[i] / (prior_.var_at(i) + v);
  return out;
}

double GaussianScore::log_density(const Spectrogram& x, double sigma) const {
  x.require_same_shape(prior_.mean, "gaussian log_density");
  const double v = conv_.variance(sigma);
  double acc = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    const double s2 = prior_.var_at(i) + v;
    acc -= std::norm(x[i] - prior_.mean[i]) / s2 +
           std::log(std::numbers::pi * s2);
  }
  return acc;
}

GmmScore::GmmScore(GmmPrior prior, VarianceConvention conv)
    : prior_(std::move(prior)), conv_(conv) {
  prior_.validate();
}

std::vector<double> GmmScore::log_joint(const Spectrogram& x,
                                        double sigma) const {
  const double v = conv_.variance(sigma);
  std::vector<double> out;
  out.reserve(prior_.components.size());
  for (const auto& c : prior_.components) {
    x.require_same_shape(c.mean, "gmm score");
    const double s2 = c.var + v;
    double sq = 0.0;
    for (int i = 0; i < x.size(); ++i) sq += std::norm(x[i] - c.mean[i]);
    out.push_back(std::log(c.weight) - sq / s2 -
                  x.size() * std::log(std::numbers::pi * s2));
  }
  return out;
}

std::vector<double> GmmScore::responsibilities(const Spectrogram& x,
                                               double sigma) const {
  std::vector<double> lj = log_joint(x, sigma);
  const double lse = log_sum_exp(lj);
  for (double& l : lj) l = std::exp(l - lse);
  return lj;
}

Spectrogram GmmScore::score(const Spectrogram& x, double sigma) {
  const double v = conv_.variance(sigma);
  const std::vector<double> resp = responsibilities(x, sigma);
  Spectrogram out = x.zeros_like();
  for (size_t j = 0; j < resp.size(); ++j) {
    const auto& c = prior_.components[j];
    const double w = resp[j] / (c.var + v);
    if (w == 0.0) continue;
    for (int i = 0; i < x.size(); ++i) out[i] += w * (c.mean[i] - x[i]);
  }
  return out;
}

double GmmScore::log_density(const Spectrogram& x, double sigma) const {
  return log_sum_exp(log_joint(x, sigma));
}

DeltaScore::DeltaScore(DeltaPrior prior, VarianceConvention conv)
    : prior_(std::move(prior)), conv_(conv) {}

double DeltaScore::variance(double sigma) const {
  const double v = conv_.variance(sigma);
  if (!(v > 0.0))
    throw DomainError("delta prior score undefined at zero perturbation");
  return v;
}

Spectrogram DeltaScore::score(const Spectrogram& x, double sigma) {
  x.require_same_shape(prior_.target, "delta score");
  const double inv = 1.0 / variance(sigma);
  Spectrogram out = x.zeros_like();
  for (int i = 0; i < x.size(); ++i) out[i] = (prior_.target[i] - x[i]) * inv;
  return out;
}

Spectrogram DeltaScore::jvp(const Spectrogram& x, double sigma,
                            const Spectrogram& direction) {
  x.require_same_shape(prior_.target, "delta jvp");
  x.require_same_shape(direction, "delta jvp");
  Spectrogram out = direction;
  out *= -1.0 / variance(sigma);
  return out;
}

double DeltaScore::log_density(const Spectrogram& x, double sigma) const {
  x.require_same_shape(prior_.target, "delta log_density");
  const double v = variance(sigma);
  double sq = 0.0;
  for (int i = 0; i < x.size(); ++i) sq += std::norm(x[i] - prior_.target[i]);
  return -sq / v - x.size() * std::log(std::numbers::pi * v);
}

Spectrogram ZeroScore::score(const Spectrogram& x, double) {
  return x.zeros_like();
}

Spectrogram ZeroScore::jvp(const Spectrogram& x, double,
                           const Spectrogram& direction) {
  x.require_same_shape(direction, "zero jvp");
  return x.zeros_like();
}

}  // namespace dps

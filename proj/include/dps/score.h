// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DPS_SCORE_H_
#define DPS_SCORE_H_

#include <string>
#include <vector>

#include "dps/diffusion.h"
#include "dps/stft.h"

namespace dps {

// Score convention used throughout the library.
//
// Each bin is a circular complex variable; "variance" always means the total
// complex variance E|X - E X|^2 (half of it in each of Re and Im). The score
// is the conjugate Wirtinger derivative of log p,
//   s = d log p / d conj(X) = (d/dRe + i d/dIm) log p / 2,
// which makes Tweedie read E[X0 | X] = X + v * s and makes the Langevin and
// probability-flow updates of the sampler consistent with unit-total-variance
// complex noise.
class ScoreProvider {
 public:
  virtual ~ScoreProvider() = default;

  virtual bool supports_jvp() const = 0;
  virtual Spectrogram score(const Spectrogram& x, double sigma) = 0;
  // J_s u, with J_s the Jacobian of the score as a map R^{2D} -> R^{2D}
  // (symmetric for any true score). Throws CapabilityError by default.
  virtual Spectrogram jvp(const Spectrogram& x, double sigma,
                          const Spectrogram& direction);
  virtual std::string describe() const = 0;
};

// Maps the conditioning level sigma to the perturbation variance v seen by an
// analytic prior: v = sigma^2 (kPaper) or sigma^2 - sigma_min^2 (kExact).
struct VarianceConvention {
  TweedieMode mode = TweedieMode::kPaper;
  double sigma_min = 0.05;

  double variance(double sigma) const;
};

// Independent circular Gaussian per bin, N(mean, var). `var` holds either one
// value for all bins or one value per bin.
struct GaussianPrior {
  Spectrogram mean;
  std::vector<double> var;

  double var_at(int i) const { return var.size() == 1 ? var[0] : var[i]; }
  void validate() const;
};

struct GmmComponent {
  double weight;
  Spectrogram mean;
  double var;
};

// Mixture of isotropic Gaussians over the whole spectrogram.
struct GmmPrior {
  std::vector<GmmComponent> components;

  void validate() const;
};

// Prior concentrated on a single spectrogram.
struct DeltaPrior {
  Spectrogram target;
};

// Exact scores of the priors above after diffusion to level sigma. Each also
// exposes the closed-form log-density of the diffused distribution.
class GaussianScore : public ScoreProvider {
 public:
  GaussianScore(GaussianPrior prior, VarianceConvention conv = {});

  bool supports_jvp() const override { return true; }
  Spectrogram score(const Spectrogram& x, double sigma) override;
  Spectrogram jvp(const Spectrogram& x, double sigma,
                  const Spectrogram& direction) override;
  std::string describe() const override { return "gaussian"; }

  double log_density(const Spectrogram& x, double sigma) const;
  const GaussianPrior& prior() const { return prior_; }
  const VarianceConvention& convention() const { return conv_; }

 private:
  GaussianPrior prior_;
  VarianceConvention conv_;
};

class GmmScore : public ScoreProvider {
 public:
  GmmScore(GmmPrior prior, VarianceConvention conv = {});

  bool supports_jvp() const override { return false; }
  Spectrogram score(const Spectrogram& x, double sigma) override;
  std::string describe() const override { return "gmm"; }

  double log_density(const Spectrogram& x, double sigma) const;
  // Posterior component probabilities given x.
  std::vector<double> responsibilities(const Spectrogram& x,
                                       double sigma) const;

 private:
  std::vector<double> log_joint(const Spectrogram& x, double sigma) const;

  GmmPrior prior_;
  VarianceConvention conv_;
};

class DeltaScore : public ScoreProvider {
 public:
  DeltaScore(DeltaPrior prior, VarianceConvention conv = {});

  bool supports_jvp() const override { return true; }
  Spectrogram score(const Spectrogram& x, double sigma) override;
  Spectrogram jvp(const Spectrogram& x, double sigma,
                  const Spectrogram& direction) override;
  std::string describe() const override { return "delta"; }

  double log_density(const Spectrogram& x, double sigma) const;
  const Spectrogram& target() const { return prior_.target; }

 private:
  double variance(double sigma) const;

  DeltaPrior prior_;
  VarianceConvention conv_;
};

// s = 0 everywhere; turns the sampler into pure measurement fitting.
class ZeroScore : public ScoreProvider {
 public:
  bool supports_jvp() const override { return true; }
  Spectrogram score(const Spectrogram& x, double sigma) override;
  Spectrogram jvp(const Spectrogram& x, double sigma,
                  const Spectrogram& direction) override;
  std::string describe() const override { return "zero"; }
};

}  // namespace dps

#endif  // DPS_SCORE_H_

// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DPS_ORACLE_H_
#define DPS_ORACLE_H_

#include <Eigen/Dense>

#include "dps/operators.h"

namespace dps::oracle {

// Largest spectrogram (bins x frames) that densify_measurement materializes.
inline constexpr int kMaxDenseBins = 64;

struct GaussianPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

// Exact posterior of x ~ N(prior_mean, diag(prior_var)), y = A x + n,
// n ~ N(0, eta^2 I), all real.
GaussianPosterior gaussian_posterior(const Eigen::VectorXd& prior_mean,
                                     const Eigen::VectorXd& prior_var,
                                     const Eigen::MatrixXd& A, double eta,
                                     const Eigen::VectorXd& y);

// Real coordinates of a spectrogram: bin i maps to (2i, 2i + 1) = (Re, Im).
Eigen::VectorXd to_real(const Spectrogram& X);
void from_real(const Eigen::VectorXd& v, Spectrogram& X);

// Dense matrix of X -> model.forward(X) over the real coordinates above,
// shape measurement_len x 2 * bins * frames.
Eigen::MatrixXd densify_measurement(const MeasurementModel& model);
// Dense matrix of model.adjoint, built column by column.
Eigen::MatrixXd densify_adjoint(const MeasurementModel& model);

}  // namespace dps::oracle

#endif  // DPS_ORACLE_H_

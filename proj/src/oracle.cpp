// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dps/oracle.h"

#include <string>

#include "dps/errors.h"

namespace dps::oracle {

GaussianPosterior gaussian_posterior(const Eigen::VectorXd& prior_mean,
                                     const Eigen::VectorXd& prior_var,
                                     const Eigen::MatrixXd& A, double eta,
                                     const Eigen::VectorXd& y) {
  const Eigen::Index d = prior_mean.size();
  if (prior_var.size() != d || A.cols() != d || A.rows() != y.size())
    throw ContractViolation("gaussian_posterior: dimension mismatch");
  if (!(eta > 0.0))
    throw DomainError("gaussian_posterior: eta must be positive");
  if ((prior_var.array() <= 0.0).any())
    throw DomainError("gaussian_posterior: prior variance must be positive");

  // Sigma A^T and S = A Sigma A^T + eta^2 I.
  const Eigen::MatrixXd sigma_at = prior_var.asDiagonal() * A.transpose();
  Eigen::MatrixXd s = A * sigma_at;
  s.diagonal().array() += eta * eta;
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success)
    throw NumericalError("gaussian_posterior: innovation covariance singular");

  GaussianPosterior post;
  post.mean = prior_mean + sigma_at * llt.solve(y - A * prior_mean);
  Eigen::MatrixXd cov = -sigma_at * llt.solve(sigma_at.transpose());
  cov.diagonal() += prior_var;
  post.covariance = 0.5 * (cov + cov.transpose());
  return post;
}

Eigen::VectorXd to_real(const Spectrogram& X) {
  Eigen::VectorXd v(2 * X.size());
  for (int i = 0; i < X.size(); ++i) {
    v[2 * i] = X[i].real();
    v[2 * i + 1] = X[i].imag();
  }
  return v;
}

void from_real(const Eigen::VectorXd& v, Spectrogram& X) {
  if (v.size() != 2 * X.size())
    throw ContractViolation("from_real: dimension mismatch");
  for (int i = 0; i < X.size(); ++i) X[i] = Complex(v[2 * i], v[2 * i + 1]);
}

namespace {

void check_dense_guard(const MeasurementModel& model) {
  if (model.state_dims() > kMaxDenseBins)
    throw ContractViolation("densify: " + std::to_string(model.state_dims()) +
                            " bins exceed the dense limit of " +
                            std::to_string(kMaxDenseBins));
}

}  // namespace

Eigen::MatrixXd densify_measurement(const MeasurementModel& model) {
  check_dense_guard(model);
  Spectrogram basis = model.zero_state();
  const int cols = 2 * basis.size();
  Eigen::MatrixXd A(model.measurement_len(), cols);
  for (int j = 0; j < cols; ++j) {
    const int i = j / 2;
    basis[i] = (j % 2 == 0) ? Complex(1.0, 0.0) : Complex(0.0, 1.0);
    const TimeSignal col = model.forward(basis);
    A.col(j) = Eigen::Map<const Eigen::VectorXd>(col.data(), col.size());
    basis[i] = Complex(0.0, 0.0);
  }
  return A;
}

Eigen::MatrixXd densify_adjoint(const MeasurementModel& model) {
  check_dense_guard(model);
  const int rows = model.measurement_len();
  Eigen::MatrixXd At(2 * model.state_dims(), rows);
  TimeSignal e(rows, 0.0);
  for (int j = 0; j < rows; ++j) {
    e[j] = 1.0;
    At.col(j) = to_real(model.adjoint(e));
    e[j] = 0.0;
  }
  return At;
}

}  // namespace dps::oracle

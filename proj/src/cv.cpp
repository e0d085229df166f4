#include "dbmc/cv.hpp"

#include <cmath>
#include <string>

#include "dbmc/error.hpp"

namespace dbmc {

void CvSamples::validate() const {
  if (x.cols() < 1) throw Error(ErrorCode::invalid_argument, "at least one control is required");
  if (x.rows() != y.size())
    throw Error(ErrorCode::invalid_argument, "control rows do not match the number of samples");
  if (mu.size() != x.cols())
    throw Error(ErrorCode::invalid_argument, "control means do not match the number of controls");
  if (y.size() < x.cols() + 2)
    throw Error(ErrorCode::invalid_argument,
                "need at least k + 2 = " + std::to_string(x.cols() + 2) + " samples, got " +
                    std::to_string(y.size()));
}

BetaSolution optimal_beta(const CvSamples& samples) {
  samples.validate();
  const double denom = static_cast<double>(samples.n()) - 1.0;
  const Eigen::VectorXd yc = samples.y.array() - samples.y.mean();
  const Eigen::MatrixXd xc = samples.x.rowwise() - samples.x.colwise().mean();

  BetaSolution out;
  out.sigma_x = (xc.transpose() * xc) / denom;
  out.sigma_xy = (xc.transpose() * yc) / denom;
  out.var_y = yc.squaredNorm() / denom;

  if ((out.sigma_x.diagonal().array() <= 0.0).any())
    throw Error(ErrorCode::singular_covariance, "a control has zero sample variance");
  // Condition of the correlation matrix, so the guard ignores control scale.
  const Eigen::VectorXd inv_sd = out.sigma_x.diagonal().cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd corr = inv_sd.asDiagonal() * out.sigma_x * inv_sd.asDiagonal();
  const Eigen::VectorXd eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(
                                  corr, Eigen::EigenvaluesOnly).eigenvalues();
  const double rcond = eig.minCoeff() / eig.maxCoeff();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(out.sigma_x);
  if (ldlt.info() != Eigen::Success || !(rcond >= kSingularRcond))
    throw Error(ErrorCode::singular_covariance,
                "control covariance is numerically singular (rcond=" + std::to_string(rcond) +
                    "); duplicated or degenerate controls?");
  out.beta = ldlt.solve(out.sigma_xy);
  out.r_squared = out.var_y > 0.0 ? out.sigma_xy.dot(out.beta) / out.var_y : 0.0;
  return out;
}

ControlledMean controlled_mean(const CvSamples& samples, const Eigen::VectorXd& beta) {
  if (beta.size() != samples.x.cols())
    throw Error(ErrorCode::invalid_argument, "beta length does not match the number of controls");
  if (samples.x.rows() != samples.y.size() || samples.mu.size() != samples.x.cols())
    throw Error(ErrorCode::invalid_argument, "inconsistent sample shapes");
  const Eigen::VectorXd adjustment =
      (samples.x.rowwise() - samples.mu.transpose()) * beta;
  const Eigen::VectorXd z = samples.y - adjustment;
  const SampleMoments m = sample_moments(z);
  return {m.mean, m.variance};
}

double theoretical_vrr(double r_squared) {
  if (!(r_squared >= 0.0))
    throw Error(ErrorCode::invalid_argument, "r_squared must be non-negative");
  if (r_squared >= 1.0)
    throw Error(ErrorCode::unbounded, "r_squared >= 1: variance reduction ratio is unbounded");
  return 1.0 / (1.0 - r_squared);
}

double empirical_vrr(double var_crude, double var_controlled) {
  if (!(var_controlled > 0.0))
    throw Error(ErrorCode::degenerate_variance, "controlled variance must be positive");
  if (!(var_crude > 0.0))
    throw Error(ErrorCode::degenerate_variance, "crude variance must be positive");
  return var_crude / var_controlled;
}

SampleMoments sample_moments(const Eigen::Ref<const Eigen::VectorXd>& values) {
  const auto n = values.size();
  if (n < 1) throw Error(ErrorCode::invalid_argument, "no samples");
  SampleMoments m;
  m.mean = values.mean();
  m.variance = n > 1 ? (values.array() - m.mean).square().sum() / static_cast<double>(n - 1) : 0.0;
  return m;
}

}  // namespace dbmc

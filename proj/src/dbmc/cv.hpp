#pragma once

#include <Eigen/Dense>

namespace dbmc {

// n samples of the estimation variable, n x k samples of the controls and the
// k control means (exact or database estimates).
struct CvSamples {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  Eigen::VectorXd mu;

  std::size_t n() const { return static_cast<std::size_t>(y.size()); }
  std::size_t k() const { return static_cast<std::size_t>(x.cols()); }

  // n >= k + 2, k >= 1, shapes consistent. Throws Error(invalid_argument).
  void validate() const;
};

struct BetaSolution {
  Eigen::VectorXd beta;
  Eigen::MatrixXd sigma_x;
  Eigen::VectorXd sigma_xy;
  double var_y = 0.0;
  double r_squared = 0.0;
};

// Reciprocal condition number of the control correlation matrix below which
// sigma_x is rejected as singular.
inline constexpr double kSingularRcond = 1e-12;

// beta solving sigma_x * beta = sigma_xy on unbiased (n - 1) sample
// covariances. Throws Error(singular_covariance) for degenerate controls.
BetaSolution optimal_beta(const CvSamples& samples);

struct ControlledMean {
  double mean = 0.0;
  double variance = 0.0;  // sample variance (n - 1) of the adjusted samples
};

// Mean of Z_j = y_j - beta^T (x_j - mu).
ControlledMean controlled_mean(const CvSamples& samples, const Eigen::VectorXd& beta);

// (1 - R^2)^-1. Throws Error(unbounded) when r_squared >= 1.
double theoretical_vrr(double r_squared);

// var_crude / var_controlled. Throws Error(degenerate_variance) when
// var_controlled <= 0.
double empirical_vrr(double var_crude, double var_controlled);

// Unbiased sample mean and variance of a sequence.
struct SampleMoments {
  double mean = 0.0;
  double variance = 0.0;
};
SampleMoments sample_moments(const Eigen::Ref<const Eigen::VectorXd>& values);

}  // namespace dbmc

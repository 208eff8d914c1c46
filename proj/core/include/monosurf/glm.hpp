#pragma once

// Poisson log-link quasi-likelihood regression by iteratively reweighted
// least squares, with an offset and Pearson dispersion.

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace monosurf {

struct GlmOptions {
  double tolerance = 1e-8;  // relative deviance change
  int max_iterations = 50;
  int max_halvings = 10;
  double rank_threshold = 1e-10;  // relative pivot threshold for aliasing
};

struct GlmFit {
  Eigen::VectorXd coefficients;
  /// dispersion * (X'WX)^{-1} at the converged weights.
  Eigen::MatrixXd covariance;
  /// (X'WX)^{-1}, the pure-Poisson covariance.
  Eigen::MatrixXd unscaled_covariance;
  double dispersion = 1.0;
  bool converged = false;
  int iterations = 0;
  double deviance = 0.0;
  std::vector<double> deviance_trace;
  Eigen::VectorXd fitted;  // mu
};

/// Throws FitError on aliased columns (listing them), on an all-zero response,
/// and on non-convergence (ConvergenceError carries the last iterate).
GlmFit fit_poisson_quasi(std::span<const double> y, const Eigen::MatrixXd& x, std::span<const double> offset,
                         const GlmOptions& options = {}, const std::vector<std::string>& column_labels = {});

/// Poisson deviance 2 sum[y log(y / mu) - (y - mu)].
double poisson_deviance(std::span<const double> y, const Eigen::VectorXd& mu);

struct PartitionedCovariance {
  Eigen::MatrixXd v11, v12, v21, v22;

  Eigen::Index n_beta() const noexcept { return v11.rows(); }
  Eigen::Index n_gamma() const noexcept { return v22.rows(); }
  Eigen::MatrixXd assemble() const;
};

/// Splits the covariance into surface (leading n_beta) and confounder blocks.
PartitionedCovariance partition_covariance(const Eigen::MatrixXd& covariance, Eigen::Index n_beta);
inline PartitionedCovariance partition_covariance(const GlmFit& fit, Eigen::Index n_beta) {
  return partition_covariance(fit.covariance, n_beta);
}

}  // namespace monosurf

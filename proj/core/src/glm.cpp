#include "monosurf/glm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "monosurf/error.hpp"

namespace monosurf {
namespace {

Eigen::VectorXd linear_predictor(const Eigen::MatrixXd& x, const Eigen::VectorXd& beta, const Eigen::VectorXd& off) {
  return x * beta + off;
}

// Upper-triangular factor R of sqrt(W) X.
Eigen::MatrixXd weighted_r(const Eigen::MatrixXd& x, const Eigen::VectorXd& w) {
  const Eigen::MatrixXd wx = w.cwiseSqrt().asDiagonal() * x;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(wx);
  return qr.matrixQR().topRows(x.cols()).triangularView<Eigen::Upper>();
}

}  // namespace

double poisson_deviance(std::span<const double> y, const Eigen::VectorXd& mu) {
  double dev = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double m = mu(static_cast<Eigen::Index>(i));
    const double yi = y[i];
    dev += (yi > 0.0 ? yi * std::log(yi / m) : 0.0) - (yi - m);
  }
  return 2.0 * dev;
}

GlmFit fit_poisson_quasi(std::span<const double> y, const Eigen::MatrixXd& x, std::span<const double> offset,
                         const GlmOptions& options, const std::vector<std::string>& column_labels) {
  const auto n = x.rows();
  const auto p = x.cols();
  if (static_cast<Eigen::Index>(y.size()) != n || static_cast<Eigen::Index>(offset.size()) != n) {
    throw ConfigError("fit_poisson_quasi: response, design and offset lengths differ");
  }
  if (n <= p) throw ConfigError("fit_poisson_quasi: need more observations than coefficients");
  double total = 0.0;
  for (double v : y) {
    if (!(v >= 0.0)) throw DomainError("fit_poisson_quasi: counts must be non-negative");
    total += v;
  }
  if (total <= 0.0) throw FitError("fit_poisson_quasi: response is all zero");

  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rank_qr(x);
    rank_qr.setThreshold(options.rank_threshold);
    if (rank_qr.rank() < p) {
      std::vector<std::string> aliased;
      const auto& perm = rank_qr.colsPermutation().indices();
      std::vector<Eigen::Index> idx;
      for (Eigen::Index i = rank_qr.rank(); i < p; ++i) idx.push_back(perm(i));
      std::sort(idx.begin(), idx.end());
      std::ostringstream msg;
      msg << "design is rank deficient (rank " << rank_qr.rank() << " of " << p << "); aliased columns:";
      for (auto i : idx) {
        const auto label = static_cast<std::size_t>(i) < column_labels.size() ? column_labels[static_cast<std::size_t>(i)]
                                                                                : "col" + std::to_string(i);
        aliased.push_back(label);
        msg << ' ' << label;
      }
      throw FitError(msg.str(), aliased);
    }
  }

  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
  const Eigen::Map<const Eigen::VectorXd> off(offset.data(), n);

  GlmFit fit;
  Eigen::VectorXd mu = yv.array() + 0.1;
  Eigen::VectorXd eta = mu.array().log();
  double dev_old = poisson_deviance(y, mu);
  Eigen::VectorXd beta;
  bool have_beta = false;

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    const Eigen::VectorXd z = (eta - off).array() + (yv - mu).array() / mu.array();
    const Eigen::VectorXd sw = mu.cwiseSqrt();
    const Eigen::MatrixXd wx = sw.asDiagonal() * x;
    Eigen::VectorXd beta_new = wx.householderQr().solve(sw.cwiseProduct(z));

    Eigen::VectorXd eta_new = linear_predictor(x, beta_new, off);
    Eigen::VectorXd mu_new = eta_new.array().exp();
    double dev_new = poisson_deviance(y, mu_new);

    // Increases below the convergence tolerance are rounding noise at the
    // optimum, not divergence.
    const double slack = options.tolerance * (std::abs(dev_old) + 0.1);
    int halvings = 0;
    while (have_beta && (!std::isfinite(dev_new) || dev_new > dev_old + slack)) {
      if (++halvings > options.max_halvings) {
        throw ConvergenceError("fit_poisson_quasi: step halving failed to reduce the deviance", beta, dev_old);
      }
      beta_new = 0.5 * (beta_new + beta);
      eta_new = linear_predictor(x, beta_new, off);
      mu_new = eta_new.array().exp();
      dev_new = poisson_deviance(y, mu_new);
    }
    if (!std::isfinite(dev_new)) {
      throw ConvergenceError("fit_poisson_quasi: non-finite deviance", beta_new, dev_new);
    }

    const bool first = !have_beta;
    const double change = std::abs(dev_new - dev_old) / (std::abs(dev_new) + 0.1);
    beta = std::move(beta_new);
    eta = std::move(eta_new);
    mu = std::move(mu_new);
    dev_old = dev_new;
    have_beta = true;
    fit.deviance_trace.push_back(dev_new);
    fit.iterations = iter;
    if (!first && change < options.tolerance) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged) {
    throw ConvergenceError("fit_poisson_quasi: no convergence after " + std::to_string(options.max_iterations) +
                               " iterations",
                           beta, dev_old);
  }

  const Eigen::MatrixXd r = weighted_r(x, mu);
  const Eigen::MatrixXd r_inv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  Eigen::MatrixXd unscaled = r_inv * r_inv.transpose();
  unscaled = 0.5 * (unscaled + unscaled.transpose()).eval();

  double pearson = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) pearson += (yv(i) - mu(i)) * (yv(i) - mu(i)) / mu(i);

  fit.coefficients = std::move(beta);
  fit.dispersion = pearson / static_cast<double>(n - p);
  fit.unscaled_covariance = std::move(unscaled);
  fit.covariance = fit.dispersion * fit.unscaled_covariance;
  fit.deviance = dev_old;
  fit.fitted = std::move(mu);
  return fit;
}

Eigen::MatrixXd PartitionedCovariance::assemble() const {
  const auto nb = v11.rows();
  const auto ng = v22.rows();
  Eigen::MatrixXd out(nb + ng, nb + ng);
  out.topLeftCorner(nb, nb) = v11;
  out.topRightCorner(nb, ng) = v12;
  out.bottomLeftCorner(ng, nb) = v21;
  out.bottomRightCorner(ng, ng) = v22;
  return out;
}

PartitionedCovariance partition_covariance(const Eigen::MatrixXd& covariance, Eigen::Index n_beta) {
  const auto p = covariance.rows();
  if (covariance.cols() != p) throw ConfigError("partition_covariance: matrix is not square");
  if (n_beta < 0 || n_beta > p) {
    throw ConfigError("partition_covariance: block size " + std::to_string(n_beta) + " does not fit a " +
                      std::to_string(p) + "x" + std::to_string(p) + " matrix");
  }
  const auto ng = p - n_beta;
  PartitionedCovariance out;
  out.v11 = covariance.topLeftCorner(n_beta, n_beta);
  out.v12 = covariance.topRightCorner(n_beta, ng);
  out.v21 = out.v12.transpose();
  out.v22 = covariance.bottomRightCorner(ng, ng);
  return out;
}

}  // namespace monosurf

#pragma once

// Second stage: first-stage estimates are treated as Gaussian data around a
// projection of a global monotone surface, and the latent global coefficients
// share a separable Gaussian-process prior across cities,
//
//   beta_hat_c | theta_c ~ N(A_c theta_c, V11_c),   theta_c = trunc(theta*_c)
//   vec[theta*_1 .. theta*_C] ~ N(1 kron mu, R(rho) kron S2 kron S1)
//   mu ~ N(mu0 1, S2 kron S1 / tau),  mu0 ~ N(0, tau0^2),  tau ~ Gamma(a, b)
//   S1 ~ IW(nu1, I),  S2 ~ IW(nu2, I),  log rho ~ N(mu_rho, sigma_rho^2)
//
// with R_{cc'} = exp(-d(c, c') / rho) and tau acting as a precision.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "monosurf/basis.hpp"
#include "monosurf/random.hpp"
#include "monosurf/stage1.hpp"

namespace monosurf {

struct Hyperpriors {
  double mu0_mean = 0.0;
  double tau0 = 100.0;  // sd of mu0
  double a_tau = 0.001;
  double b_tau = 0.001;
  double mu_rho = 7.0;
  double sigma_rho = 10.0;
  int iw_df1 = 0;  // 0 selects M1 + 2
  int iw_df2 = 0;  // 0 selects M2 + 2
  double iw_scale = 1.0;  // scale matrix is iw_scale * I
};

/// Separable GP prior parameters plus the city distance matrix.
struct SpatialPrior {
  Eigen::MatrixXd s1;  // (M1+1)^2
  Eigen::MatrixXd s2;  // (M2+1)^2
  double rho = 1.0;    // km
  Eigen::VectorXd mu;
  double mu0 = 0.0;
  double tau = 1.0;
  Eigen::MatrixXd distances;  // km
  bool spatial = true;

  /// exp(-d / rho), or the identity for the non-spatial model.
  Eigen::MatrixXd correlation() const;
  /// cov(theta*_c, theta*_c') = R_{cc'} (S2 kron S1).
  Eigen::MatrixXd cross_covariance(Eigen::Index c, Eigen::Index c2) const;
};

struct HierState {
  Eigen::MatrixXd theta_star;  // P x C, one column per city
  SpatialPrior prior;
  double log_likelihood = 0.0;

  Eigen::VectorXd theta(Eigen::Index c, int m1, int m2, bool truncate = true) const;
};

/// A_c = (b_c' b_c)^{-1} b_c' B(X_c) T^{-1}, by QR of the local design b_c.
/// Throws FitError naming the city when b_c is rank deficient.
Eigen::MatrixXd projection_matrix(const Stage1Fit& fit, const BernsteinBasis1D& global_ozone,
                                  const BernsteinBasis1D& global_temp);

/// log N(beta_hat; A theta, V11). Throws FitError if V11 is not positive definite.
double log_likelihood_stage2(const Stage1Fit& fit, const Eigen::MatrixXd& a, const Eigen::VectorXd& theta);

/// gamma_hat + V21 V11^{-1} (A theta_bar - beta_hat).
Eigen::VectorXd gamma_posterior_mean(const Stage1Fit& fit, const Eigen::MatrixXd& a, const Eigen::VectorXd& theta_bar);

/// argmin 0.5 x'Qx - g'x subject to x_{j,k} >= 0 for j >= 1 (when
/// `constrained`), by a primal active-set method. Q must be positive definite.
Eigen::VectorXd cone_qp(const Eigen::MatrixXd& q, const Eigen::VectorXd& g, int m1, bool constrained = true);

/// Eigenvalues floored at 1e-10 * trace / dim. Returns true when anything changed.
bool nearest_pd(Eigen::MatrixXd& v);

struct ChainConfig {
  int iterations = 20000;
  int burn_in = 10000;
  int thin = 10;
  std::uint64_t seed = 1;
  bool spatial = true;
  bool truncate = true;
  /// false samples the prior (stage-2 likelihood switched off).
  bool use_likelihood = true;
  bool repair_covariance = false;
  /// Follow each coordinate-wise theta* update with a block move on the whole
  /// city vector. Both leave the same conditional invariant; the
  /// block move is what makes the chain mix when A_c' V11^{-1} A_c is nearly
  /// singular, which it is for any realistic exposure pattern.
  bool block_theta = true;
  double log_rho_step = 0.5;
  int adapt_every = 50;
  double target_acceptance = 0.3;

  /// Per-block switches, mainly for tests that hold parts of the state fixed.
  struct Updates {
    bool theta = true;
    bool mu = true;
    bool mu0 = true;
    bool tau = true;
    bool s1 = true;
    bool s2 = true;
    bool rho = true;
  } updates;

  void validate() const;
  int retained() const { return (iterations - burn_in) / thin; }
};

/// Per-city likelihood terms in theta coordinates.
struct CityTerms {
  std::string city_id;
  Eigen::MatrixXd a;     // n_beta_c x P
  Eigen::MatrixXd h;     // A' V11^{-1} A
  Eigen::VectorXd g;     // A' V11^{-1} beta_hat
  double log_const = 0;  // log N(beta_hat; 0, V11)
  bool repaired = false;
};

struct HierModel {
  int m1 = 7;
  int m2 = 9;
  BernsteinBasis1D ozone;
  BernsteinBasis1D temp;
  std::vector<CityTerms> cities;
  Eigen::MatrixXd distances;

  int dim() const noexcept { return (m1 + 1) * (m2 + 1); }
  Eigen::Index n_cities() const noexcept { return static_cast<Eigen::Index>(cities.size()); }

  static HierModel from_stage1(const Stage1Batch& batch, bool repair_covariance = false);
};

struct SamplerCounters {
  std::int64_t mixture_underflow = 0;
  std::int64_t iw_jitter = 0;
  std::int64_t rho_proposed = 0;
  std::int64_t rho_accepted = 0;
  std::int64_t rho_cholesky_rejects = 0;
  std::int64_t block_proposed = 0;
  std::int64_t block_accepted = 0;
};

/// One systematic-scan Gibbs/MH chain. Exposes the individual block updates
/// so they can be exercised in isolation.
class GibbsSampler {
 public:
  GibbsSampler(const HierModel& model, const Hyperpriors& priors, const ChainConfig& cfg);

  /// Initial state: theta*_c at the cone-constrained mode of its conditional
  /// under theta* ~ N(0, iw_scale I); hyperparameters at prior centres.
  HierState initial_state() const;
  void set_state(HierState state);
  const HierState& state() const noexcept { return state_; }

  void update_theta_star(Eigen::Index c);
  /// Metropolis-Hastings move on all of theta*_c. On the orthant where a fixed
  /// set of constrained coordinates is negative the conditional is Gaussian;
  /// the proposal is that Gaussian for the current orthant, so moves within
  /// the orthant are always accepted. Without truncation it is an exact
  /// block Gibbs draw.
  void update_theta_block(Eigen::Index c);
  void update_mu();
  void update_mu0();
  void update_tau();
  void update_s1();
  void update_s2();
  /// Returns whether the proposal was accepted.
  bool update_log_rho();

  /// theta* sweep (coordinate-wise, then block), hyperparameters, then rho.
  void sweep();

  double log_rho_step() const noexcept { return step_; }
  void set_log_rho_step(double s) { step_ = s; }
  const SamplerCounters& counters() const noexcept { return counters_; }
  Rng& rng() noexcept { return rng_; }

  double current_log_likelihood() const;

 private:
  void refresh_prior_factors();
  void refresh_sigma_inverse();
  double log_rho_target(double log_rho, const Eigen::MatrixXd& g_mat, bool* ok) const;

  const HierModel& model_;
  Hyperpriors priors_;
  ChainConfig cfg_;
  int nu1_ = 0;
  int nu2_ = 0;
  Rng rng_;
  HierState state_;
  double step_ = 0.5;
  SamplerCounters counters_;

  Eigen::MatrixXd s1_inv_, s2_inv_, sigma_inv_;
  Eigen::MatrixXd l1_, l2_;  // Cholesky factors of S1, S2
  Eigen::MatrixXd r_, q_, r_chol_;
};

struct PosteriorSample {
  int m1 = 0;
  int m2 = 0;
  BernsteinBasis1D ozone;
  BernsteinBasis1D temp;
  std::vector<std::string> city_ids;
  /// theta draws (truncated when the model truncates), one P x C matrix per draw.
  std::vector<Eigen::MatrixXd> theta;
  std::vector<double> mu0, tau, rho, log_likelihood;
  std::vector<Eigen::VectorXd> mu;

  int iterations = 0;
  int burn_in = 0;
  int thin = 1;
  std::uint64_t seed = 0;
  bool spatial = true;
  bool truncate = true;
  double rho_acceptance = 0.0;
  double final_log_rho_step = 0.0;
  SamplerCounters counters;

  std::size_t n_draws() const noexcept { return theta.size(); }
  Eigen::Index n_cities() const noexcept { return static_cast<Eigen::Index>(city_ids.size()); }
  Eigen::Index city_index(const std::string& id) const;
  /// Posterior mean of theta_c.
  Eigen::VectorXd theta_mean(Eigen::Index c) const;
  /// Surface of draw d for city c on the global basis.
  SurfaceSpec surface(std::size_t d, Eigen::Index c) const;
};

PosteriorSample run_chain(const HierModel& model, const Hyperpriors& priors, const ChainConfig& cfg);

/// Independent chains with seeds derived from cfg.seed, run on `threads` workers.
std::vector<PosteriorSample> run_chains(const HierModel& model, const Hyperpriors& priors, const ChainConfig& cfg,
                                        int n_chains, int threads = 1);

}  // namespace monosurf

#include "monosurf/hier.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <thread>

#include "monosurf/error.hpp"
#include "monosurf/stats.hpp"

namespace monosurf {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Eigen::MatrixXd kron(const Eigen::MatrixXd& b, const Eigen::MatrixXd& a) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index k = 0; k < b.rows(); ++k)
    for (Eigen::Index l = 0; l < b.cols(); ++l) out.block(k * a.rows(), l * a.cols(), a.rows(), a.cols()) = b(k, l) * a;
  return out;
}

Eigen::MatrixXd inverse_spd(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw FitError("matrix is not positive definite");
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
  return 0.5 * (inv + inv.transpose());
}

Eigen::MatrixXd lower_cholesky(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw FitError("matrix is not positive definite");
  return llt.matrixL();
}

// W ~ IW(nu, psi) via Bartlett: with psi = C C' and A the Bartlett factor of
// Wishart(nu, I), W = (C A^{-T}) (C A^{-T})'.
Eigen::MatrixXd draw_inverse_wishart(Rng& rng, double nu, Eigen::MatrixXd psi, std::int64_t& jitter_count) {
  const auto p = psi.rows();
  if (!(nu > static_cast<double>(p - 1))) throw ConfigError("inverse-Wishart degrees of freedom too small");
  for (int attempt = 0; attempt < 20; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> psi_llt(psi);
    if (psi_llt.info() == Eigen::Success) {
      const Eigen::MatrixXd c = psi_llt.matrixL();
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
      for (Eigen::Index i = 0; i < p; ++i) {
        a(i, i) = std::sqrt(chi_squared_draw(rng, nu - static_cast<double>(i)));
        for (Eigen::Index j = 0; j < i; ++j) a(i, j) = standard_normal(rng);
      }
      // M = C A^{-T}  <=>  M A^T = C.
      const Eigen::MatrixXd m =
          a.transpose().triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(c);
      Eigen::MatrixXd w = m * m.transpose();
      w = 0.5 * (w + w.transpose()).eval();
      Eigen::LLT<Eigen::MatrixXd> check(w);
      if (check.info() == Eigen::Success && w.allFinite()) return w;
    }
    ++jitter_count;
    psi.diagonal().array() += 1e-8 * std::max(1.0, psi.trace() / static_cast<double>(p));
  }
  throw FitError("inverse-Wishart draw failed to produce a positive definite matrix");
}

// p1 x p2 view of a psi-ordered vector (ozone index fastest).
Eigen::Map<const Eigen::MatrixXd> as_matrix(const Eigen::VectorXd& v, int p1, int p2) {
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), p1, p2);
}

}  // namespace

Eigen::MatrixXd SpatialPrior::correlation() const {
  const auto c = distances.rows();
  if (!spatial) return Eigen::MatrixXd::Identity(c, c);
  return (-distances.array() / rho).exp().matrix();
}

Eigen::MatrixXd SpatialPrior::cross_covariance(Eigen::Index c, Eigen::Index c2) const {
  const double r = spatial ? std::exp(-distances(c, c2) / rho) : (c == c2 ? 1.0 : 0.0);
  return r * kron(s2, s1);
}

Eigen::VectorXd HierState::theta(Eigen::Index c, int m1, int m2, bool truncate) const {
  Eigen::VectorXd out = theta_star.col(c);
  if (truncate) truncate_in_place(out, m1, m2);
  return out;
}

Eigen::MatrixXd projection_matrix(const Stage1Fit& fit, const BernsteinBasis1D& global_ozone,
                                  const BernsteinBasis1D& global_temp) {
  const Eigen::MatrixXd local = tensor_design(fit.local_ozone, fit.local_temp, fit.ozone, fit.temp);
  const Eigen::MatrixXd global = tensor_design(global_ozone, global_temp, fit.ozone, fit.temp) *
                                 transform_inverse(global_ozone.order(), global_temp.order());
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(local);
  qr.setThreshold(1e-10);
  if (qr.rank() < local.cols()) {
    throw FitError("city " + fit.city_id + ": local basis design is rank deficient (rank " +
                   std::to_string(qr.rank()) + " of " + std::to_string(local.cols()) + ")");
  }
  return qr.solve(global);
}

Eigen::VectorXd cone_qp(const Eigen::MatrixXd& q, const Eigen::VectorXd& g, int m1, bool constrained) {
  const auto p = g.size();
  const auto n1 = static_cast<Eigen::Index>(m1 + 1);
  const auto is_con = [&](Eigen::Index i) { return constrained && i % n1 != 0; };
  std::vector<char> free(static_cast<std::size_t>(p));
  for (Eigen::Index i = 0; i < p; ++i) free[static_cast<std::size_t>(i)] = !is_con(i);

  const auto solve_free = [&] {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < p; ++i)
      if (free[static_cast<std::size_t>(i)]) idx.push_back(i);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(p);
    if (idx.empty()) return z;
    const auto k = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd qf(k, k);
    Eigen::VectorXd gf(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      gf(a) = g(idx[static_cast<std::size_t>(a)]);
      for (Eigen::Index b = 0; b < k; ++b) qf(a, b) = q(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    }
    const Eigen::VectorXd zf = qf.llt().solve(gf);
    for (Eigen::Index a = 0; a < k; ++a) z(idx[static_cast<std::size_t>(a)]) = zf(a);
    return z;
  };

  // Lawson-Hanson style: x stays feasible, the free set grows by the most
  // violated multiplier and shrinks when a step hits a bound.
  Eigen::VectorXd x = solve_free();
  if (!constrained) return x;
  const double tol = 1e-10 * std::max(1.0, g.cwiseAbs().maxCoeff());
  for (Eigen::Index outer = 0; outer < 3 * p; ++outer) {
    const Eigen::VectorXd w = g - q * x;
    Eigen::Index best = -1;
    for (Eigen::Index i = 0; i < p; ++i)
      if (!free[static_cast<std::size_t>(i)] && w(i) > tol && (best < 0 || w(i) > w(best))) best = i;
    if (best < 0) break;
    free[static_cast<std::size_t>(best)] = 1;
    for (Eigen::Index inner = 0; inner < p; ++inner) {
      const Eigen::VectorXd z = solve_free();
      double alpha = 1.0;
      bool blocked = false;
      for (Eigen::Index i = 0; i < p; ++i)
        if (free[static_cast<std::size_t>(i)] && is_con(i) && z(i) <= 0.0) {
          blocked = true;
          const double denom = x(i) - z(i);
          alpha = std::min(alpha, denom > 0.0 ? x(i) / denom : 0.0);
        }
      if (!blocked) {
        x = z;
        break;
      }
      x += alpha * (z - x);
      for (Eigen::Index i = 0; i < p; ++i)
        if (free[static_cast<std::size_t>(i)] && is_con(i) && x(i) <= tol) {
          free[static_cast<std::size_t>(i)] = 0;
          x(i) = 0.0;
        }
    }
  }
  return x;
}

bool nearest_pd(Eigen::MatrixXd& v) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (v + v.transpose()));
  const double floor = 1e-10 * std::abs(v.trace()) / static_cast<double>(v.rows());
  Eigen::VectorXd values = eig.eigenvalues();
  bool changed = false;
  for (auto& x : values)
    if (x < floor) {
      x = floor;
      changed = true;
    }
  if (changed) v = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
  return changed;
}

double log_likelihood_stage2(const Stage1Fit& fit, const Eigen::MatrixXd& a, const Eigen::VectorXd& theta) {
  Eigen::LLT<Eigen::MatrixXd> llt(fit.v.v11);
  if (llt.info() != Eigen::Success) throw FitError("city " + fit.city_id + ": V11 is not positive definite");
  const Eigen::VectorXd resid = fit.beta_hat - a * theta;
  const Eigen::VectorXd w = llt.matrixL().solve(resid);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(resid.size()) * kLog2Pi + logdet + w.squaredNorm());
}

Eigen::VectorXd gamma_posterior_mean(const Stage1Fit& fit, const Eigen::MatrixXd& a, const Eigen::VectorXd& theta_bar) {
  Eigen::LLT<Eigen::MatrixXd> llt(fit.v.v11);
  if (llt.info() != Eigen::Success) throw FitError("city " + fit.city_id + ": V11 is singular");
  return fit.gamma_hat + fit.v.v21 * llt.solve(a * theta_bar - fit.beta_hat);
}

void ChainConfig::validate() const {
  if (iterations <= 0) throw ConfigError("chain iterations must be positive");
  if (burn_in < 0 || burn_in >= iterations) throw ConfigError("burn-in must lie in [0, iterations)");
  if (thin < 1) throw ConfigError("thin must be at least 1");
  if (thin > iterations - burn_in) throw ConfigError("thin exceeds the number of post-burn-in iterations");
  if (!(log_rho_step > 0.0)) throw ConfigError("log rho step must be positive");
  if (adapt_every < 1) throw ConfigError("adaptation interval must be at least 1");
}

HierModel HierModel::from_stage1(const Stage1Batch& batch, bool repair_covariance) {
  if (batch.fits.empty()) throw ConfigError("stage 2 needs at least one fitted city");
  HierModel model;
  model.m1 = batch.m1;
  model.m2 = batch.m2;
  model.ozone = batch.ranges.ozone_basis(batch.m1);
  model.temp = batch.ranges.temp_basis(batch.m2);
  std::vector<LatLon> points;
  for (const auto& fit : batch.fits) {
    CityTerms t;
    t.city_id = fit.city_id;
    t.a = projection_matrix(fit, model.ozone, model.temp);
    Eigen::MatrixXd v11 = fit.v.v11;
    Eigen::LLT<Eigen::MatrixXd> llt(v11);
    if (llt.info() != Eigen::Success) {
      if (!repair_covariance) throw FitError("city " + fit.city_id + ": V11 is not positive definite");
      t.repaired = nearest_pd(v11);
      llt.compute(v11);
      if (llt.info() != Eigen::Success) throw FitError("city " + fit.city_id + ": V11 repair failed");
    }
    const Eigen::MatrixXd w = llt.matrixL().solve(t.a);
    const Eigen::VectorXd z = llt.matrixL().solve(fit.beta_hat);
    t.h = w.transpose() * w;
    t.h = 0.5 * (t.h + t.h.transpose()).eval();
    t.g = w.transpose() * z;
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    t.log_const = -0.5 * (static_cast<double>(z.size()) * kLog2Pi + logdet + z.squaredNorm());
    model.cities.push_back(std::move(t));
    points.push_back(fit.location);
  }
  model.distances = distance_matrix(points);
  return model;
}

GibbsSampler::GibbsSampler(const HierModel& model, const Hyperpriors& priors, const ChainConfig& cfg)
    : model_(model), priors_(priors), cfg_(cfg), rng_(derive_seed(cfg.seed, "chain")), step_(cfg.log_rho_step) {
  cfg_.validate();
  if (model.cities.empty()) throw ConfigError("stage 2 needs at least one city");
  nu1_ = priors.iw_df1 > 0 ? priors.iw_df1 : model.m1 + 2;
  nu2_ = priors.iw_df2 > 0 ? priors.iw_df2 : model.m2 + 2;
  if (!(priors.tau0 > 0 && priors.a_tau > 0 && priors.b_tau > 0 && priors.sigma_rho > 0 && priors.iw_scale > 0)) {
    throw ConfigError("hyperprior scales must be positive");
  }
  set_state(initial_state());
}

HierState GibbsSampler::initial_state() const {
  const int p = model_.dim();
  const auto c_count = model_.n_cities();
  HierState s;
  s.theta_star.resize(p, c_count);
  for (Eigen::Index c = 0; c < c_count; ++c) {
    const auto& terms = model_.cities[static_cast<std::size_t>(c)];
    // Mode of the city's conditional under the initial hyperparameters
    // (theta* ~ N(0, iw_scale I)), restricted to the cone when truncating.
    Eigen::MatrixXd q = terms.h;
    q.diagonal().array() += 1.0 / priors_.iw_scale;
    Eigen::VectorXd theta = cfg_.use_likelihood ? Eigen::VectorXd(cone_qp(q, terms.g, model_.m1, cfg_.truncate))
                                                : Eigen::VectorXd::Zero(p);
    s.theta_star.col(c) = theta;
  }
  auto& pr = s.prior;
  pr.s1 = priors_.iw_scale * Eigen::MatrixXd::Identity(model_.m1 + 1, model_.m1 + 1);
  pr.s2 = priors_.iw_scale * Eigen::MatrixXd::Identity(model_.m2 + 1, model_.m2 + 1);
  pr.rho = std::exp(priors_.mu_rho);
  pr.mu0 = priors_.mu0_mean;
  pr.mu = Eigen::VectorXd::Constant(p, pr.mu0);
  pr.tau = priors_.a_tau / priors_.b_tau;
  pr.distances = model_.distances;
  pr.spatial = cfg_.spatial;
  return s;
}

void GibbsSampler::set_state(HierState state) {
  state_ = std::move(state);
  state_.prior.spatial = cfg_.spatial;
  if (state_.prior.distances.size() == 0) state_.prior.distances = model_.distances;
  refresh_sigma_inverse();
  refresh_prior_factors();
  state_.log_likelihood = current_log_likelihood();
}

void GibbsSampler::refresh_sigma_inverse() {
  s1_inv_ = inverse_spd(state_.prior.s1);
  s2_inv_ = inverse_spd(state_.prior.s2);
  l1_ = lower_cholesky(state_.prior.s1);
  l2_ = lower_cholesky(state_.prior.s2);
  sigma_inv_ = kron(s2_inv_, s1_inv_);
}

void GibbsSampler::refresh_prior_factors() {
  r_ = state_.prior.correlation();
  Eigen::LLT<Eigen::MatrixXd> llt(r_);
  if (llt.info() != Eigen::Success) throw FitError("spatial correlation matrix is not positive definite");
  r_chol_ = llt.matrixL();
  q_ = llt.solve(Eigen::MatrixXd::Identity(r_.rows(), r_.cols()));
  q_ = 0.5 * (q_ + q_.transpose()).eval();
}

double GibbsSampler::current_log_likelihood() const {
  double total = 0.0;
  for (Eigen::Index c = 0; c < model_.n_cities(); ++c) {
    const auto& t = model_.cities[static_cast<std::size_t>(c)];
    const Eigen::VectorXd th = state_.theta(c, model_.m1, model_.m2, cfg_.truncate);
    total += t.log_const - 0.5 * th.dot(t.h * th) + t.g.dot(th);
  }
  return total;
}

void GibbsSampler::update_theta_star(Eigen::Index c) {
  const int p = model_.dim();
  const int n1 = model_.m1 + 1;
  const auto c_count = model_.n_cities();
  const auto& terms = model_.cities[static_cast<std::size_t>(c)];
  auto x = state_.theta_star.col(c);
  const auto& mu = state_.prior.mu;

  // Conditional GP prior of theta*_c given the other cities: N(m, Sigma / Q_cc).
  const double qcc = q_(c, c);
  Eigen::VectorXd m = mu;
  for (Eigen::Index c2 = 0; c2 < c_count; ++c2) {
    if (c2 == c || q_(c, c2) == 0.0) continue;
    m -= (q_(c, c2) / qcc) * (state_.theta_star.col(c2) - mu);
  }
  // r = Lambda (x - m) with Lambda = Q_cc Sigma^{-1}.
  Eigen::VectorXd r = qcc * (sigma_inv_ * (x - m));

  Eigen::VectorXd theta = x;
  if (cfg_.truncate) truncate_in_place(theta, model_.m1, model_.m2);
  const bool lik = cfg_.use_likelihood;
  Eigen::VectorXd u;
  if (lik) u = terms.h * theta;

  for (int i = 0; i < p; ++i) {
    const double lam = qcc * sigma_inv_(i, i);
    const double prior_mean = x(i) - r(i) / lam;
    const double a = lik ? terms.h(i, i) : 0.0;
    const double b = lik ? terms.g(i) - u(i) + a * theta(i) : 0.0;
    const bool constrained = cfg_.truncate && (i % n1) != 0;

    double x_new;
    if (!constrained) {
      const double prec = lam + a;
      x_new = (lam * prior_mean + b) / prec + standard_normal(rng_) / std::sqrt(prec);
    } else {
      // Positive piece: prior times likelihood at theta = x. Non-positive
      // piece: prior alone (theta = 0 there).
      const double v1 = 1.0 / (lam + a);
      const double m1 = v1 * (lam * prior_mean + b);
      const double sd1 = std::sqrt(v1);
      const double log_wp = 0.5 * m1 * m1 / v1 - 0.5 * lam * prior_mean * prior_mean +
                            0.5 * std::log(2.0 * std::numbers::pi * v1) + log_norm_cdf(m1 / sd1);
      const double log_wm =
          0.5 * std::log(2.0 * std::numbers::pi / lam) + log_norm_cdf(-prior_mean * std::sqrt(lam));
      if (!std::isfinite(log_wp) && !std::isfinite(log_wm)) {
        ++counters_.mixture_underflow;
        continue;
      }
      double p_plus;
      if (!std::isfinite(log_wm)) {
        p_plus = 1.0;
      } else if (!std::isfinite(log_wp)) {
        p_plus = 0.0;
      } else {
        p_plus = 1.0 / (1.0 + std::exp(log_wm - log_wp));
      }
      if (uniform01(rng_) < p_plus) {
        x_new = truncated_normal_lower(rng_, m1, sd1, 0.0);
      } else {
        x_new = truncated_normal_upper(rng_, prior_mean, 1.0 / std::sqrt(lam), 0.0);
      }
    }

    const double dx = x_new - x(i);
    if (dx != 0.0) {
      r.noalias() += (qcc * dx) * sigma_inv_.col(i);
      x(i) = x_new;
    }
    const double theta_new = constrained ? std::max(0.0, x_new) : x_new;
    const double dtheta = theta_new - theta(i);
    if (dtheta != 0.0) {
      theta(i) = theta_new;
      if (lik) u.noalias() += dtheta * terms.h.col(i);
    }
  }
}

void GibbsSampler::update_theta_block(Eigen::Index c) {
  const int p = model_.dim();
  const int n1 = model_.m1 + 1;
  const auto c_count = model_.n_cities();
  const auto& terms = model_.cities[static_cast<std::size_t>(c)];
  auto x = state_.theta_star.col(c);
  const auto& mu = state_.prior.mu;
  const double qcc = q_(c, c);
  Eigen::VectorXd m = mu;
  for (Eigen::Index c2 = 0; c2 < c_count; ++c2) {
    if (c2 == c || q_(c, c2) == 0.0) continue;
    m -= (q_(c, c2) / qcc) * (state_.theta_star.col(c2) - mu);
  }
  const Eigen::MatrixXd lambda = qcc * sigma_inv_;
  const bool lik = cfg_.use_likelihood;
  const bool trunc = cfg_.truncate && lik;

  // Gaussian that equals the conditional up to a constant on the orthant
  // where exactly the coordinates in `neg` are truncated.
  struct Local {
    Eigen::LLT<Eigen::MatrixXd> llt;
    Eigen::VectorXd mean;
    double half_logdet = 0.0;
  };
  const auto local = [&](const std::vector<char>& neg) {
    Eigen::MatrixXd prec = lambda;
    Eigen::VectorXd lin = lambda * m;
    if (lik) {
      Eigen::MatrixXd h = terms.h;
      Eigen::VectorXd g = terms.g;
      for (int i = 0; i < p; ++i)
        if (neg[static_cast<std::size_t>(i)]) {
          h.row(i).setZero();
          h.col(i).setZero();
          g(i) = 0.0;
        }
      prec += h;
      lin += g;
    }
    Local out;
    out.llt.compute(prec);
    if (out.llt.info() != Eigen::Success) throw FitError("theta* block precision is not positive definite");
    out.mean = out.llt.solve(lin);
    out.half_logdet = out.llt.matrixLLT().diagonal().array().log().sum();
    return out;
  };
  const auto pattern = [&](const Eigen::VectorXd& v) {
    std::vector<char> neg(static_cast<std::size_t>(p), 0);
    if (trunc)
      for (int i = 0; i < p; ++i) neg[static_cast<std::size_t>(i)] = (i % n1) != 0 && v(i) < 0.0;
    return neg;
  };
  const auto log_q = [](const Local& l, const Eigen::VectorXd& v) {
    const Eigen::VectorXd d = l.llt.matrixU() * (v - l.mean);
    return l.half_logdet - 0.5 * d.squaredNorm();
  };
  const auto log_target = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd t = v;
    truncate_in_place(t, model_.m1, model_.m2);
    const Eigen::VectorXd d = v - m;
    return -0.5 * d.dot(lambda * d) + terms.g.dot(t) - 0.5 * t.dot(terms.h * t);
  };

  const Eigen::VectorXd current = x;
  const auto neg = pattern(current);
  const Local here = local(neg);
  Eigen::VectorXd z(p);
  for (int i = 0; i < p; ++i) z(i) = standard_normal(rng_);
  const Eigen::VectorXd prop = here.mean + here.llt.matrixU().solve(z);
  ++counters_.block_proposed;

  const auto neg_prop = pattern(prop);
  if (neg_prop == neg) {
    // Same orthant: the proposal is the conditional itself there.
    x = prop;
    ++counters_.block_accepted;
    return;
  }
  const Local there = local(neg_prop);
  const double log_ratio =
      log_target(prop) + log_q(there, current) - log_target(current) - log_q(here, prop);
  if (std::log(uniform01(rng_)) < log_ratio) {
    x = prop;
    ++counters_.block_accepted;
  }
}

void GibbsSampler::update_mu() {
  auto& pr = state_.prior;
  const int p1 = model_.m1 + 1;
  const int p2 = model_.m2 + 1;
  const Eigen::VectorXd w = q_.rowwise().sum();
  const double s = w.sum();
  const Eigen::VectorXd mean =
      (pr.tau * pr.mu0 * Eigen::VectorXd::Ones(model_.dim()) + state_.theta_star * w) / (pr.tau + s);
  Eigen::MatrixXd z(p1, p2);
  for (int k = 0; k < p2; ++k)
    for (int j = 0; j < p1; ++j) z(j, k) = standard_normal(rng_);
  const Eigen::MatrixXd noise = l1_ * z * l2_.transpose() / std::sqrt(pr.tau + s);
  pr.mu = mean + Eigen::Map<const Eigen::VectorXd>(noise.data(), noise.size());
}

void GibbsSampler::update_mu0() {
  auto& pr = state_.prior;
  const double ones_quad = s1_inv_.sum() * s2_inv_.sum();
  const double prec = 1.0 / (priors_.tau0 * priors_.tau0) + pr.tau * ones_quad;
  const double lin = priors_.mu0_mean / (priors_.tau0 * priors_.tau0) + pr.tau * (sigma_inv_ * pr.mu).sum();
  pr.mu0 = lin / prec + standard_normal(rng_) / std::sqrt(prec);
}

void GibbsSampler::update_tau() {
  auto& pr = state_.prior;
  const Eigen::VectorXd e = pr.mu.array() - pr.mu0;
  const double quad = e.dot(sigma_inv_ * e);
  pr.tau = gamma_draw(rng_, priors_.a_tau + 0.5 * model_.dim(), priors_.b_tau + 0.5 * quad);
}

void GibbsSampler::update_s1() {
  auto& pr = state_.prior;
  const int p1 = model_.m1 + 1;
  const int p2 = model_.m2 + 1;
  const auto c_count = model_.n_cities();
  const Eigen::MatrixXd e = state_.theta_star.colwise() - pr.mu;
  // Whiten across cities so the columns are iid N(0, S2 kron S1).
  const Eigen::MatrixXd white = r_chol_.triangularView<Eigen::Lower>().solve(e.transpose()).transpose();
  Eigen::MatrixXd scatter = priors_.iw_scale * Eigen::MatrixXd::Identity(p1, p1);
  for (Eigen::Index c = 0; c < c_count; ++c) {
    const Eigen::VectorXd col = white.col(c);
    const auto ec = as_matrix(col, p1, p2);
    scatter.noalias() += ec * s2_inv_ * ec.transpose();
  }
  const Eigen::VectorXd emu = pr.mu.array() - pr.mu0;
  const auto em = as_matrix(emu, p1, p2);
  scatter.noalias() += pr.tau * (em * s2_inv_ * em.transpose());
  scatter = 0.5 * (scatter + scatter.transpose()).eval();
  const double df = nu1_ + static_cast<double>((c_count + 1) * p2);
  pr.s1 = draw_inverse_wishart(rng_, df, scatter, counters_.iw_jitter);
  refresh_sigma_inverse();
}

void GibbsSampler::update_s2() {
  auto& pr = state_.prior;
  const int p1 = model_.m1 + 1;
  const int p2 = model_.m2 + 1;
  const auto c_count = model_.n_cities();
  const Eigen::MatrixXd e = state_.theta_star.colwise() - pr.mu;
  const Eigen::MatrixXd white = r_chol_.triangularView<Eigen::Lower>().solve(e.transpose()).transpose();
  Eigen::MatrixXd scatter = priors_.iw_scale * Eigen::MatrixXd::Identity(p2, p2);
  for (Eigen::Index c = 0; c < c_count; ++c) {
    const Eigen::VectorXd col = white.col(c);
    const auto ec = as_matrix(col, p1, p2);
    scatter.noalias() += ec.transpose() * s1_inv_ * ec;
  }
  const Eigen::VectorXd emu = pr.mu.array() - pr.mu0;
  const auto em = as_matrix(emu, p1, p2);
  scatter.noalias() += pr.tau * (em.transpose() * s1_inv_ * em);
  scatter = 0.5 * (scatter + scatter.transpose()).eval();
  const double df = nu2_ + static_cast<double>((c_count + 1) * p1);
  pr.s2 = draw_inverse_wishart(rng_, df, scatter, counters_.iw_jitter);
  refresh_sigma_inverse();
}

double GibbsSampler::log_rho_target(double log_rho, const Eigen::MatrixXd& g_mat, bool* ok) const {
  const double rho = std::exp(log_rho);
  Eigen::MatrixXd r = (-model_.distances.array() / rho).exp().matrix();
  Eigen::LLT<Eigen::MatrixXd> llt(r);
  const double z = (log_rho - priors_.mu_rho) / priors_.sigma_rho;
  if (llt.info() != Eigen::Success || !std::isfinite(rho)) {
    *ok = false;
    return -std::numeric_limits<double>::infinity();
  }
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double tr = llt.solve(g_mat).trace();
  *ok = std::isfinite(logdet) && std::isfinite(tr);
  return -0.5 * model_.dim() * logdet - 0.5 * tr - 0.5 * z * z;
}

bool GibbsSampler::update_log_rho() {
  if (!cfg_.spatial) return false;
  auto& pr = state_.prior;
  const Eigen::MatrixXd e = state_.theta_star.colwise() - pr.mu;
  const Eigen::MatrixXd g_mat = e.transpose() * sigma_inv_ * e;
  const double current = std::log(pr.rho);
  const double proposal = current + step_ * standard_normal(rng_);
  ++counters_.rho_proposed;
  bool ok_cur = true, ok_prop = true;
  const double t_cur = log_rho_target(current, g_mat, &ok_cur);
  const double t_prop = log_rho_target(proposal, g_mat, &ok_prop);
  if (!ok_prop) {
    ++counters_.rho_cholesky_rejects;
    return false;
  }
  if (ok_cur && !(std::log(uniform01(rng_)) < t_prop - t_cur)) return false;
  pr.rho = std::exp(proposal);
  refresh_prior_factors();
  ++counters_.rho_accepted;
  return true;
}

void GibbsSampler::sweep() {
  const auto& up = cfg_.updates;
  if (up.theta)
    for (Eigen::Index c = 0; c < model_.n_cities(); ++c) {
      update_theta_star(c);
      if (cfg_.block_theta) update_theta_block(c);
    }
  if (up.mu) update_mu();
  if (up.mu0) update_mu0();
  if (up.tau) update_tau();
  if (up.s1) update_s1();
  if (up.s2) update_s2();
  if (up.rho) update_log_rho();
}

Eigen::Index PosteriorSample::city_index(const std::string& id) const {
  const auto it = std::find(city_ids.begin(), city_ids.end(), id);
  if (it == city_ids.end()) throw ConfigError("city '" + id + "' is not in the posterior sample");
  return it - city_ids.begin();
}

Eigen::VectorXd PosteriorSample::theta_mean(Eigen::Index c) const {
  if (theta.empty()) throw ConfigError("posterior sample has no draws");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(theta.front().rows());
  for (const auto& d : theta) acc += d.col(c);
  return acc / static_cast<double>(theta.size());
}

SurfaceSpec PosteriorSample::surface(std::size_t d, Eigen::Index c) const {
  return {ozone, temp, theta_to_psi(theta.at(d).col(c), m1, m2)};
}

PosteriorSample run_chain(const HierModel& model, const Hyperpriors& priors, const ChainConfig& cfg) {
  cfg.validate();
  GibbsSampler sampler(model, priors, cfg);
  PosteriorSample out;
  out.m1 = model.m1;
  out.m2 = model.m2;
  out.ozone = model.ozone;
  out.temp = model.temp;
  for (const auto& t : model.cities) out.city_ids.push_back(t.city_id);
  out.iterations = cfg.iterations;
  out.burn_in = cfg.burn_in;
  out.thin = cfg.thin;
  out.seed = cfg.seed;
  out.spatial = cfg.spatial;
  out.truncate = cfg.truncate;

  const auto n_keep = static_cast<std::size_t>(cfg.retained());
  out.theta.reserve(n_keep);
  std::int64_t window_acc = 0, window_prop = 0;
  std::int64_t post_acc = 0, post_prop = 0;

  for (int it = 1; it <= cfg.iterations; ++it) {
    const auto before = sampler.counters();
    sampler.sweep();
    const auto& after = sampler.counters();
    const auto acc = after.rho_accepted - before.rho_accepted;
    const auto prop = after.rho_proposed - before.rho_proposed;

    if (it <= cfg.burn_in) {
      window_acc += acc;
      window_prop += prop;
      if (it % cfg.adapt_every == 0 && window_prop > 0) {
        const double rate = static_cast<double>(window_acc) / static_cast<double>(window_prop);
        sampler.set_log_rho_step(
            std::clamp(sampler.log_rho_step() * std::exp(2.0 * (rate - cfg.target_acceptance)), 1e-4, 50.0));
        window_acc = window_prop = 0;
      }
      continue;
    }
    post_acc += acc;
    post_prop += prop;
    if ((it - cfg.burn_in) % cfg.thin != 0) continue;

    const auto& s = sampler.state();
    Eigen::MatrixXd th = s.theta_star;
    if (cfg.truncate)
      for (Eigen::Index c = 0; c < th.cols(); ++c) truncate_in_place(th.col(c), model.m1, model.m2);
    out.theta.push_back(std::move(th));
    out.mu.push_back(s.prior.mu);
    out.mu0.push_back(s.prior.mu0);
    out.tau.push_back(s.prior.tau);
    out.rho.push_back(s.prior.rho);
    out.log_likelihood.push_back(sampler.current_log_likelihood());
  }
  out.rho_acceptance =
      post_prop > 0 ? static_cast<double>(post_acc) / static_cast<double>(post_prop) : std::nan("");
  out.final_log_rho_step = sampler.log_rho_step();
  out.counters = sampler.counters();
  return out;
}

std::vector<PosteriorSample> run_chains(const HierModel& model, const Hyperpriors& priors, const ChainConfig& cfg,
                                        int n_chains, int threads) {
  if (n_chains < 1) throw ConfigError("need at least one chain");
  std::vector<PosteriorSample> out(static_cast<std::size_t>(n_chains));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_chains));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int k = next++; k < n_chains; k = next++) {
      try {
        ChainConfig c = cfg;
        c.seed = derive_seed(cfg.seed, "chain-index", static_cast<std::uint64_t>(k));
        out[static_cast<std::size_t>(k)] = run_chain(model, priors, c);
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
    }
  };
  const int workers = std::clamp(threads, 1, n_chains);
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace monosurf

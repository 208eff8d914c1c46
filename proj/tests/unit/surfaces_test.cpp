#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "monosurf/error.hpp"
#include "monosurf/random.hpp"
#include "monosurf/stats.hpp"
#include "monosurf/surfaces.hpp"

namespace monosurf {
namespace {

PosteriorSample fake_posterior(int n_draws, int n_cities, std::uint64_t seed) {
  PosteriorSample p;
  p.m1 = 3;
  p.m2 = 2;
  p.ozone = BernsteinBasis1D(3, 0.0, 120.0, "ozone");
  p.temp = BernsteinBasis1D(2, 40.0, 60.0, "temp");
  for (int c = 0; c < n_cities; ++c) p.city_ids.push_back("c" + std::to_string(c));
  Rng rng(seed);
  for (int d = 0; d < n_draws; ++d) {
    Eigen::MatrixXd th(12, n_cities);
    for (Eigen::Index i = 0; i < th.size(); ++i) th(i) = 0.05 + 0.02 * standard_normal(rng);
    for (Eigen::Index c = 0; c < n_cities; ++c) truncate_in_place(th.col(c), 3, 2);
    p.theta.push_back(th);
    p.mu0.push_back(0.0);
    p.tau.push_back(1.0);
    p.rho.push_back(100.0);
    p.log_likelihood.push_back(0.0);
    p.mu.push_back(Eigen::VectorXd::Zero(12));
  }
  p.iterations = n_draws;
  p.thin = 1;
  return p;
}

TEST(Summarize, Basics) {
  const std::vector<double> same(20, 1.5);
  const Summary s = summarize(same);
  EXPECT_EQ(s.mean, 1.5);
  EXPECT_EQ(s.sd, 0.0);
  EXPECT_EQ(s.q025, 1.5);
  EXPECT_EQ(s.pr_gt0, 1.0);
  const std::vector<double> mixed = {-1, -2, 3, 4};
  EXPECT_DOUBLE_EQ(summarize(mixed).pr_gt0, 0.5);
  EXPECT_DOUBLE_EQ(summarize(mixed, 3.5).pr_gt0, 0.25);
}

TEST(PrecisionWeights, Cases) {
  const std::vector<double> one = {2.0};
  EXPECT_EQ(precision_weights(one), std::vector<double>{1.0});
  const std::vector<double> eq = {3.0, 3.0};
  EXPECT_EQ(precision_weights(eq), (std::vector<double>{0.5, 0.5}));
  const std::vector<double> uneq = {1.0, 3.0};
  const auto w = precision_weights(uneq);
  EXPECT_DOUBLE_EQ(w[0], 0.75);
  EXPECT_DOUBLE_EQ(w[1], 0.25);
  const std::vector<double> zero = {0.0, 1.0, 0.0};
  EXPECT_EQ(precision_weights(zero), (std::vector<double>{0.5, 0.0, 0.5}));
}

TEST(Support, RectangleAndDensity) {
  const Rectangle r{10, 20, 50, 60};
  EXPECT_TRUE(Support::rectangle(r).contains(15, 55));
  EXPECT_FALSE(Support::rectangle(r).contains(21, 55));
  // Days along the diagonal: the off-diagonal corners are empty.
  std::vector<double> oz, tp;
  for (int i = 0; i <= 1000; ++i) {
    oz.push_back(i / 10.0);
    tp.push_back(50.0 + i / 20.0);
  }
  const Support s = Support::of(oz, tp);
  EXPECT_TRUE(s.contains(50.0, 75.0));
  EXPECT_FALSE(s.contains(0.0, 100.0));
  EXPECT_FALSE(s.contains(100.0, 50.0));
  EXPECT_FALSE(s.contains(150.0, 75.0));
  EXPECT_DOUBLE_EQ(s.bounds().ozone_hi, 100.0);
  SupportRule strict;
  strict.min_days = 5000;
  EXPECT_FALSE(Support::of(oz, tp, strict).contains(50.0, 75.0));
}

TEST(Grid, EndpointsIncluded) {
  const GridSpec g = GridSpec::over({0, 10, 20, 30}, 11, 3);
  EXPECT_EQ(g.size(), 33u);
  EXPECT_EQ(g.ozone.front(), 0.0);
  EXPECT_EQ(g.ozone.back(), 10.0);
  EXPECT_EQ(g.temp[1], 25.0);
}

TEST(SurfaceDraws, MatchNaiveLoop) {
  const PosteriorSample p = fake_posterior(30, 2, 1);
  const GridSpec g = GridSpec::over({5, 115, 42, 98}, 7, 5);
  for (const auto kind : {SurfaceKind::LogRr, SurfaceKind::Interaction}) {
    const Eigen::MatrixXd m = surface_draws(p, 1, g, kind);
    for (std::size_t d = 0; d < p.n_draws(); ++d) {
      const SurfaceSpec s = p.surface(d, 1);
      for (std::size_t k = 0; k < g.temp.size(); ++k)
        for (std::size_t i = 0; i < g.ozone.size(); ++i) {
          const double v = kind == SurfaceKind::LogRr ? eval_dfdx1(s, g.ozone[i], g.temp[k])
                                                      : eval_cross_deriv(s, g.ozone[i], g.temp[k]);
          EXPECT_NEAR(m(static_cast<Eigen::Index>(i + g.ozone.size() * k), static_cast<Eigen::Index>(d)),
                      kLogRrScale * v, 1e-10);
        }
    }
  }
}

TEST(SurfaceGrids, SummariesAndMask) {
  const PosteriorSample p = fake_posterior(40, 1, 2);
  const GridSpec g = GridSpec::over({0, 120, 40, 100}, 9, 9);
  const Support half = Support::rectangle({0, 60, 40, 100});
  const SurfaceGrid lr = log_rr_surface(p, 0, g, half);
  const SurfaceGrid ix = interaction_surface(p, 0, g, half);
  const Eigen::MatrixXd raw = surface_draws(p, 0, g, SurfaceKind::LogRr);
  for (std::size_t k = 0; k < 9; ++k)
    for (std::size_t i = 0; i < 9; ++i) {
      const std::size_t at = lr.index(i, k);
      EXPECT_EQ(lr.support[at] != 0, g.ozone[i] <= 60.0);
      if (!lr.support[at]) continue;
      std::vector<double> row(raw.cols());
      for (Eigen::Index d = 0; d < raw.cols(); ++d) row[static_cast<std::size_t>(d)] = raw(static_cast<Eigen::Index>(at), d);
      EXPECT_NEAR(lr.values[at].mean, mean(row), 1e-12);
      EXPECT_GE(lr.values[at].pr_gt0, 0.0);
      EXPECT_LE(ix.values[at].pr_gt0, 1.0);
      // Draws live in the cone: the log RR is never negative.
      EXPECT_GE(lr.values[at].q025, -1e-9);
    }
}

TEST(NationalSurface, SingleCityEqualsCity) {
  const PosteriorSample p = fake_posterior(25, 3, 3);
  const GridSpec g = GridSpec::over({0, 120, 40, 100}, 6, 6);
  const Support all = Support::rectangle({0, 120, 40, 100});
  const std::vector<Eigen::Index> one = {2};
  const std::vector<Support> sup = {all};
  const SurfaceGrid nat = national_surface(p, one, sup, g, SurfaceKind::LogRr);
  const SurfaceGrid city = log_rr_surface(p, 2, g, all);
  for (std::size_t i = 0; i < nat.size(); ++i) EXPECT_NEAR(nat.values[i].mean, city.values[i].mean, 1e-12);
}

TEST(NationalSurface, UncoveredPointsMasked) {
  const PosteriorSample p = fake_posterior(25, 2, 4);
  const GridSpec g = GridSpec::over({0, 120, 40, 100}, 5, 5);
  const std::vector<Eigen::Index> both = {0, 1};
  const std::vector<Support> sup = {Support::rectangle({0, 30, 40, 100}), Support::rectangle({0, 60, 40, 100})};
  const NationalDraws nd = national_draws(p, both, sup, g, SurfaceKind::LogRr);
  for (std::size_t k = 0; k < 5; ++k)
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(nd.support[i + 5 * k] != 0, g.ozone[i] <= 60.0);
  // Where only city 1 covers the point, the pool is city 1 exactly.
  const Eigen::MatrixXd c1 = surface_draws(p, 1, g, SurfaceKind::LogRr);
  EXPECT_LT((nd.draws.row(2) - c1.row(2)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Stratified, IdenticalWindowsGiveUnitRatio) {
  const PosteriorSample p = fake_posterior(30, 1, 5);
  Rng rng(6);
  std::vector<double> oz, tp;
  for (int t = 0; t < 500; ++t) {
    tp.push_back(50.0 + 45.0 * uniform01(rng));
    oz.push_back(std::clamp(10.0 + (tp.back() - 50.0) * 2.0 + 10.0 * standard_normal(rng), 1.0, 119.0));
  }
  StratifiedConfig cfg;
  cfg.moderate_lo = cfg.high_lo;
  cfg.moderate_hi = cfg.high_hi;
  const StratifiedComparison sc = stratified_ratio(p, 0, oz, tp, cfg);
  for (double r : sc.ratio_observed_draws) EXPECT_DOUBLE_EQ(r, 1.0);
  ASSERT_TRUE(sc.ratio_common.has_value());
  EXPECT_DOUBLE_EQ(sc.ratio_common->mean, 1.0);
  EXPECT_EQ(sc.ratio_common->sd, 0.0);
}

TEST(ExcessMortality, FlatAndShiftedSurfaces) {
  PosteriorSample p = fake_posterior(10, 1, 7);
  std::vector<double> oz, tp;
  for (int t = 0; t <= 100; ++t) {
    oz.push_back(t);
    tp.push_back(40.0 + 0.5 * t);
  }
  for (auto& th : p.theta) th.setZero();
  for (double v : excess_mortality(p, 0, oz, tp).draws) EXPECT_EQ(v, 0.0);

  // An ozone-linear surface whose q50 to q95 rise is log(1.05) in every draw.
  const double q50 = quantile(oz, 0.5), q95 = quantile(oz, 0.95);
  const double slope = std::log(1.05) / (q95 - q50);  // per ppb
  for (auto& th : p.theta) {
    th.setZero();
    // psi_{j,k} = slope * range * j / M1: a linear function of ozone.
    for (int k = 0; k <= 2; ++k)
      for (int j = 1; j <= 3; ++j) th(coeff_index(j, k, 3), 0) = slope * 120.0 / 3.0;
  }
  for (double v : excess_mortality(p, 0, oz, tp).draws) EXPECT_NEAR(v, 5.0, 1e-10);
}

TEST(ExcessMortality, MatchesNaiveLoop) {
  const PosteriorSample p = fake_posterior(20, 2, 8);
  std::vector<double> oz, tp;
  Rng rng(9);
  for (int t = 0; t < 300; ++t) {
    oz.push_back(1.0 + 110.0 * uniform01(rng));
    tp.push_back(45.0 + 50.0 * uniform01(rng));
  }
  const ExcessMortality em = excess_mortality(p, 1, oz, tp);
  for (std::size_t d = 0; d < p.n_draws(); ++d) {
    const SurfaceSpec s = p.surface(d, 1);
    const double diff = eval_surface(s, em.ozone_q95, em.temp_q95) - eval_surface(s, em.ozone_q50, em.temp_q50);
    EXPECT_NEAR(em.draws[d], 100.0 * std::expm1(diff), 1e-10);
  }
}

TEST(PoolDraws, WeightsAndMean) {
  const std::vector<std::vector<double>> draws = {{1, 2, 3, 4}, {10, 10, 10, 10}, {0, 4, 0, 4}};
  const PooledSummary ps = pool_draws("g", draws);
  EXPECT_EQ(ps.n_cities, 3u);
  ASSERT_EQ(ps.weights.size(), 3u);
  EXPECT_DOUBLE_EQ(ps.weights[1], 1.0);  // the zero-variance city takes all the weight
  EXPECT_DOUBLE_EQ(ps.summary.mean, 10.0);
}

}  // namespace
}  // namespace monosurf

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "monosurf/basis.hpp"
#include "monosurf/error.hpp"

namespace monosurf {
namespace {

// Explicit binomial form, independent of the de Casteljau recurrence.
double bernstein_binomial(int m, int j, double u) {
  const double log_c = std::lgamma(m + 1.0) - std::lgamma(j + 1.0) - std::lgamma(m - j + 1.0);
  return std::exp(log_c) * std::pow(u, j) * std::pow(1.0 - u, m - j);
}

// Direct double sum over the binomial form.
double surface_oracle(const SurfaceSpec& s, double x1, double x2) {
  const double u = (x1 - s.ozone.lo()) / s.ozone.range();
  const double v = (x2 - s.temp.lo()) / s.temp.range();
  double f = 0.0;
  for (int k = 0; k <= s.m2(); ++k)
    for (int j = 0; j <= s.m1(); ++j)
      f += s.coeff(j, k) * bernstein_binomial(s.m1(), j, u) * bernstein_binomial(s.m2(), k, v);
  return f;
}

SurfaceSpec random_surface(std::mt19937_64& rng, int m1, int m2) {
  std::normal_distribution<double> n01;
  Eigen::VectorXd psi((m1 + 1) * (m2 + 1));
  for (auto& v : psi) v = n01(rng);
  return {BernsteinBasis1D(m1, 10.0, 90.0), BernsteinBasis1D(m2, 40.0, 60.0), psi};
}

TEST(Bernstein, MatchesBinomialForm) {
  for (int m : {0, 1, 2, 5, 9, 20}) {
    for (double u : {0.0, 0.13, 0.5, 0.77, 1.0}) {
      const Eigen::VectorXd b = bernstein_unit(m, u);
      ASSERT_EQ(b.size(), m + 1);
      for (int j = 0; j <= m; ++j) EXPECT_NEAR(b(j), bernstein_binomial(m, j, u), 1e-13) << m << ' ' << j << ' ' << u;
    }
  }
}

TEST(Bernstein, PartitionOfUnityAndNonnegative) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif;
  for (int m = 0; m <= 40; ++m) {
    const double u = unif(rng);
    const Eigen::VectorXd b = bernstein_unit(m, u);
    EXPECT_NEAR(b.sum(), 1.0, 1e-12);
    EXPECT_GE(b.minCoeff(), 0.0);
  }
}

TEST(Bernstein, EndpointsAreIndicators) {
  const Eigen::VectorXd b0 = bernstein_unit(6, 0.0);
  const Eigen::VectorXd b1 = bernstein_unit(6, 1.0);
  EXPECT_DOUBLE_EQ(b0(0), 1.0);
  EXPECT_DOUBLE_EQ(b1(6), 1.0);
  EXPECT_DOUBLE_EQ(b0.tail(6).sum(), 0.0);
  EXPECT_DOUBLE_EQ(b1.head(6).sum(), 0.0);
}

TEST(Bernstein, SpanOverloadAgrees) {
  std::vector<double> out(8);
  bernstein_unit(7, 0.31, out);
  const Eigen::VectorXd b = bernstein_unit(7, 0.31);
  for (int j = 0; j < 8; ++j) EXPECT_DOUBLE_EQ(out[static_cast<std::size_t>(j)], b(j));
}

TEST(Basis1D, RescaleAndDomain) {
  const BernsteinBasis1D b(4, 20.0, 80.0);
  EXPECT_DOUBLE_EQ(b.rescale(20.0), 0.0);
  EXPECT_DOUBLE_EQ(b.rescale(100.0), 1.0);
  EXPECT_DOUBLE_EQ(b.rescale(60.0), 0.5);
  EXPECT_DOUBLE_EQ(b.rescale(100.0 + 1e-12), 1.0);
  EXPECT_THROW(b.rescale(101.0), DomainError);
  EXPECT_THROW(b.rescale(19.0), DomainError);
  EXPECT_THROW(BernsteinBasis1D(-1, 0.0, 1.0), ConfigError);
  EXPECT_THROW(BernsteinBasis1D(3, 0.0, 0.0), DomainError);
}

TEST(Basis1D, DesignRowsMatchEval) {
  const BernsteinBasis1D b(5, 0.0, 10.0);
  const std::vector<double> xs = {0.0, 2.5, 7.0, 10.0};
  const Eigen::MatrixXd d = b.design(xs);
  ASSERT_EQ(d.rows(), 4);
  ASSERT_EQ(d.cols(), 6);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_LT((d.row(i).transpose() - b.eval(xs[static_cast<std::size_t>(i)])).norm(), 1e-15);
}

TEST(Surface, MatchesDoubleSumOracle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif;
  for (int rep = 0; rep < 20; ++rep) {
    const SurfaceSpec s = random_surface(rng, 1 + rep % 8, rep % 6);
    const double x1 = 10.0 + 90.0 * unif(rng), x2 = 40.0 + 60.0 * unif(rng);
    EXPECT_NEAR(eval_surface(s, x1, x2), surface_oracle(s, x1, x2), 1e-12);
  }
}

TEST(Surface, CoefficientLengthChecked) {
  EXPECT_THROW(SurfaceSpec(BernsteinBasis1D(2, 0, 1), BernsteinBasis1D(2, 0, 1), Eigen::VectorXd::Zero(8)), ConfigError);
}

TEST(Surface, ConstantSurfaceHasZeroDerivatives) {
  const SurfaceSpec s(BernsteinBasis1D(5, 0, 100), BernsteinBasis1D(4, 0, 50), Eigen::VectorXd::Constant(30, 2.5));
  EXPECT_NEAR(eval_surface(s, 33.0, 17.0), 2.5, 1e-14);
  EXPECT_NEAR(eval_dfdx1(s, 33.0, 17.0), 0.0, 1e-14);
  EXPECT_NEAR(eval_cross_deriv(s, 33.0, 17.0), 0.0, 1e-14);
}

TEST(Surface, BilinearCrossDerivative) {
  // psi_{j,k} = (j / M1)(k / M2) reproduces u1 * u2.
  const int m1 = 3, m2 = 4;
  Eigen::VectorXd psi((m1 + 1) * (m2 + 1));
  for (int k = 0; k <= m2; ++k)
    for (int j = 0; j <= m1; ++j) psi(coeff_index(j, k, m1)) = (j / double(m1)) * (k / double(m2));
  const SurfaceSpec s(BernsteinBasis1D(m1, 5, 20), BernsteinBasis1D(m2, -3, 8), psi);
  for (double x1 : {5.0, 12.0, 25.0})
    for (double x2 : {-3.0, 0.0, 5.0}) {
      EXPECT_NEAR(eval_surface(s, x1, x2), (x1 - 5) / 20 * (x2 + 3) / 8, 1e-14);
      EXPECT_NEAR(eval_cross_deriv(s, x1, x2), 1.0 / 160.0, 1e-14);
    }
}

TEST(Surface, DerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(0.05, 0.95);
  for (int rep = 0; rep < 30; ++rep) {
    const SurfaceSpec s = random_surface(rng, 1 + rep % 9, 1 + rep % 7);
    const double x1 = 10.0 + 90.0 * unif(rng), x2 = 40.0 + 60.0 * unif(rng);
    const double h1 = 1e-3 * 90.0, h2 = 1e-3 * 60.0;
    auto f = [&](double a, double b) { return eval_surface(s, a, b); };
    auto d1 = [&](double a, double b) {
      return (-f(a + 2 * h1, b) + 8 * f(a + h1, b) - 8 * f(a - h1, b) + f(a - 2 * h1, b)) / (12 * h1);
    };
    const double fd1 = d1(x1, x2);
    const double fd12 = (-d1(x1, x2 + 2 * h2) + 8 * d1(x1, x2 + h2) - 8 * d1(x1, x2 - h2) + d1(x1, x2 - 2 * h2)) / (12 * h2);
    const double an1 = eval_dfdx1(s, x1, x2), an12 = eval_cross_deriv(s, x1, x2);
    EXPECT_NEAR(an1, fd1, 1e-6 * std::max(std::abs(an1), 1e-2));
    EXPECT_NEAR(an12, fd12, 1e-5 * std::max(std::abs(an12), 1e-3));
  }
}

TEST(Surface, DegenerateOrdersGiveZeroDerivatives) {
  const SurfaceSpec s(BernsteinBasis1D(0, 0, 1), BernsteinBasis1D(3, 0, 1), Eigen::VectorXd::LinSpaced(4, 0, 3));
  EXPECT_EQ(eval_dfdx1(s, 0.3, 0.4), 0.0);
  EXPECT_EQ(eval_cross_deriv(s, 0.3, 0.4), 0.0);
  const SurfaceSpec t(BernsteinBasis1D(3, 0, 1), BernsteinBasis1D(0, 0, 1), Eigen::VectorXd::LinSpaced(4, 0, 3));
  EXPECT_EQ(eval_cross_deriv(t, 0.3, 0.4), 0.0);
}

TEST(TensorDesign, RowsAreKroneckerProducts) {
  const BernsteinBasis1D a(3, 0, 10), b(2, 0, 5);
  const std::vector<double> x1 = {0.0, 4.0, 9.5}, x2 = {5.0, 1.0, 2.2};
  const Eigen::MatrixXd d = tensor_design(a, b, x1, x2);
  ASSERT_EQ(d.cols(), 12);
  for (std::size_t t = 0; t < 3; ++t) {
    const Eigen::VectorXd ba = a.eval(x1[t]), bb = b.eval(x2[t]);
    for (int k = 0; k <= 2; ++k)
      for (int j = 0; j <= 3; ++j)
        EXPECT_NEAR(d(static_cast<Eigen::Index>(t), coeff_index(j, k, 3)), ba(j) * bb(k), 1e-15);
  }
}

TEST(Transform, DenseKroneckerForm) {
  const int m1 = 4, m2 = 2;
  Eigen::MatrixXd dmat = Eigen::MatrixXd::Identity(m1 + 1, m1 + 1);
  for (int j = 1; j <= m1; ++j) dmat(j, j - 1) = -1.0;
  Eigen::MatrixXd kron = Eigen::MatrixXd::Zero(15, 15);
  for (int k = 0; k <= m2; ++k) kron.block(k * (m1 + 1), k * (m1 + 1), m1 + 1, m1 + 1) = dmat;
  const Eigen::MatrixXd t = transform_matrix(m1, m2);
  EXPECT_EQ((t - kron).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LT((t * transform_inverse(m1, m2) - Eigen::MatrixXd::Identity(15, 15)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Transform, FastFormsMatchMatrices) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n01;
  const int m1 = 5, m2 = 3;
  Eigen::VectorXd psi(24);
  for (auto& v : psi) v = n01(rng);
  EXPECT_LT((psi_to_theta(psi, m1, m2) - transform_matrix(m1, m2) * psi).norm(), 1e-14);
  EXPECT_LT((theta_to_psi(psi, m1, m2) - transform_inverse(m1, m2) * psi).norm(), 1e-13);
  EXPECT_LT((theta_to_psi(psi_to_theta(psi, m1, m2), m1, m2) - psi).norm(), 1e-13);
}

TEST(Transform, ConstantPsiGivesBlockLeaders) {
  const Eigen::VectorXd theta = psi_to_theta(Eigen::VectorXd::Constant(12, 1.5), 3, 2);
  for (int k = 0; k <= 2; ++k)
    for (int j = 0; j <= 3; ++j) EXPECT_EQ(theta(coeff_index(j, k, 3)), j == 0 ? 1.5 : 0.0);
}

TEST(Truncate, Cases) {
  const int m1 = 3, m2 = 1;
  const Eigen::VectorXd neg = Eigen::VectorXd::Constant(8, -1.0);
  const MonotoneCoeffs tn = truncate_theta(neg, m1, m2);
  for (int k = 0; k <= m2; ++k)
    for (int j = 0; j <= m1; ++j) EXPECT_EQ(tn.theta(coeff_index(j, k, m1)), j == 0 ? -1.0 : 0.0);
  EXPECT_TRUE(tn.in_cone());

  const Eigen::VectorXd pos = Eigen::VectorXd::LinSpaced(8, 0.0, 7.0);
  EXPECT_EQ((truncate_theta(pos, m1, m2).theta - pos).norm(), 0.0);

  Eigen::VectorXd in_place = neg;
  truncate_in_place(in_place, m1, m2);
  EXPECT_EQ((in_place - tn.theta).norm(), 0.0);
}

TEST(Truncate, ImpliedSurfaceIsMonotone) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n01;
  for (int rep = 0; rep < 50; ++rep) {
    const int m1 = 1 + rep % 10, m2 = rep % 7;
    Eigen::VectorXd ts((m1 + 1) * (m2 + 1));
    for (auto& v : ts) v = 2.0 * n01(rng);
    const MonotoneCoeffs mc = truncate_theta(ts, m1, m2);
    const SurfaceSpec s(BernsteinBasis1D(m1, 0, 100), BernsteinBasis1D(m2, 30, 70), mc.psi());
    for (int i = 0; i < 50; ++i)
      for (int k = 0; k < 50; ++k) ASSERT_GE(eval_dfdx1(s, 100.0 * i / 49, 30.0 + 70.0 * k / 49), -1e-10);
  }
}

}  // namespace
}  // namespace monosurf

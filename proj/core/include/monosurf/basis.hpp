#pragma once

// Bernstein polynomial bases on a rescaled interval, bivariate tensor-product
// surfaces, their closed-form derivatives, and the difference transform that
// maps surface coefficients onto the monotone cone.
//
// Coefficient ordering follows the ozone index fastest:
//   psi = (psi_{0,0}, ..., psi_{M1,0}, psi_{0,1}, ..., psi_{M1,M2}),
// so entry (j, k) lives at j + (M1 + 1) * k.

#include <span>
#include <string>

#include <Eigen/Dense>

namespace monosurf {

/// Bernstein values b_0(u, M) ... b_M(u, M) on the unit interval, computed by
/// the de Casteljau recurrence (no binomial coefficients).
Eigen::VectorXd bernstein_unit(int order, double u);

/// Writes the same values into `out` (size order + 1) without allocating.
void bernstein_unit(int order, double u, std::span<double> out);

/// Order-M Bernstein basis over the native interval [lo, lo + range].
class BernsteinBasis1D {
 public:
  BernsteinBasis1D() = default;
  BernsteinBasis1D(int order, double lo, double range, std::string name = "x");

  int order() const noexcept { return order_; }
  int size() const noexcept { return order_ + 1; }
  double lo() const noexcept { return lo_; }
  double range() const noexcept { return range_; }
  double hi() const noexcept { return lo_ + range_; }
  const std::string& name() const noexcept { return name_; }

  /// Maps a native value onto [0, 1]. Values outside [lo, lo + range] by more
  /// than a rounding tolerance raise DomainError; values inside the tolerance
  /// band are snapped to the nearest endpoint.
  double rescale(double x) const;
  bool contains(double x) const noexcept;

  Eigen::VectorXd eval(double x) const;
  /// n x (M + 1) matrix, one row per input value.
  Eigen::MatrixXd design(std::span<const double> xs) const;

  /// Same interval, different order.
  BernsteinBasis1D with_order(int order) const;

 private:
  int order_ = 0;
  double lo_ = 0.0;
  double range_ = 1.0;
  std::string name_ = "x";
};

/// Basis functions evaluated at a native value (alias kept for readability at
/// call sites that mirror the operation list).
inline Eigen::VectorXd eval_basis_1d(const BernsteinBasis1D& basis, double x) { return basis.eval(x); }

/// One bivariate Bernstein surface: two bases and a psi-ordered coefficient vector.
struct SurfaceSpec {
  BernsteinBasis1D ozone;
  BernsteinBasis1D temp;
  Eigen::VectorXd coeffs;

  SurfaceSpec() = default;
  /// Throws ConfigError when the coefficient length does not match the bases.
  SurfaceSpec(BernsteinBasis1D ozone_basis, BernsteinBasis1D temp_basis, Eigen::VectorXd psi);

  int m1() const noexcept { return ozone.order(); }
  int m2() const noexcept { return temp.order(); }
  int dimension() const noexcept { return ozone.size() * temp.size(); }
  double coeff(int j, int k) const { return coeffs(j + ozone.size() * k); }
};

inline int coeff_index(int j, int k, int m1) noexcept { return j + (m1 + 1) * k; }

/// f(x) = sum_j sum_k psi_{j,k} B_{1,j}(ozone) B_{2,k}(temp).
double eval_surface(const SurfaceSpec& spec, double ozone, double temp);

/// Partial derivative of the surface in ozone, per native ozone unit.
/// Zero when M1 = 0.
double eval_dfdx1(const SurfaceSpec& spec, double ozone, double temp);

/// Mixed partial derivative d2f / (d ozone d temp), per native unit of each.
/// Zero when M1 = 0 or M2 = 0.
double eval_cross_deriv(const SurfaceSpec& spec, double ozone, double temp);

/// Tensor design matrix: row t is B_{j,k}(x_t) in psi ordering.
Eigen::MatrixXd tensor_design(const BernsteinBasis1D& ozone, const BernsteinBasis1D& temp,
                              std::span<const double> ozone_values, std::span<const double> temp_values);

/// T = I_{M2+1} kron D, with D lower bidiagonal (1 on the diagonal, -1 below).
/// theta = T psi gives theta_{0,k} = psi_{0,k}, theta_{j,k} = psi_{j,k} - psi_{j-1,k}.
Eigen::MatrixXd transform_matrix(int m1, int m2);
/// T^{-1}: block lower-triangular ones (cumulative sums along the ozone index).
Eigen::MatrixXd transform_inverse(int m1, int m2);

/// O(P) equivalents of T psi and T^{-1} theta.
Eigen::VectorXd psi_to_theta(const Eigen::VectorXd& psi, int m1, int m2);
Eigen::VectorXd theta_to_psi(const Eigen::VectorXd& theta, int m1, int m2);

/// Coefficients theta with theta_{j,k} >= 0 for every j >= 1.
struct MonotoneCoeffs {
  Eigen::VectorXd theta;
  int m1 = 0;
  int m2 = 0;

  bool in_cone() const;
  Eigen::VectorXd psi() const { return theta_to_psi(theta, m1, m2); }
};

/// theta_{0,k} = theta*_{0,k}; theta_{j,k} = max(0, theta*_{j,k}) for j >= 1.
MonotoneCoeffs truncate_theta(const Eigen::VectorXd& theta_star, int m1, int m2);

/// In-place variant used by the sampler.
void truncate_in_place(Eigen::Ref<Eigen::VectorXd> theta, int m1, int m2);

}  // namespace monosurf

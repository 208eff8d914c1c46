#include "monosurf/basis.hpp"

#include <array>
#include <cmath>
#include <sstream>

#include "monosurf/error.hpp"

namespace monosurf {
namespace {

constexpr int kMaxOrder = 64;
using Buffer = std::array<double, kMaxOrder + 1>;

// Relative slack for values that sit on an endpoint up to rounding.
constexpr double kEdgeTolerance = 1e-9;

void check_order(int order) {
  if (order < 0 || order > kMaxOrder) {
    throw ConfigError("Bernstein order must be in [0, " + std::to_string(kMaxOrder) + "], got " +
                      std::to_string(order));
  }
}

}  // namespace

void bernstein_unit(int order, double u, std::span<double> out) {
  check_order(order);
  if (static_cast<int>(out.size()) != order + 1) {
    throw ConfigError("bernstein_unit: output span has wrong size");
  }
  const double v = 1.0 - u;
  out[0] = 1.0;
  for (int m = 1; m <= order; ++m) {
    // Raise the degree by one: b_k(m) = v b_k(m-1) + u b_{k-1}(m-1).
    out[m] = u * out[m - 1];
    for (int k = m - 1; k >= 1; --k) out[k] = v * out[k] + u * out[k - 1];
    out[0] *= v;
  }
}

Eigen::VectorXd bernstein_unit(int order, double u) {
  Eigen::VectorXd values(order + 1);
  bernstein_unit(order, u, std::span<double>(values.data(), values.size()));
  return values;
}

BernsteinBasis1D::BernsteinBasis1D(int order, double lo, double range, std::string name)
    : order_(order), lo_(lo), range_(range), name_(std::move(name)) {
  check_order(order);
  if (!(range > 0.0) || !std::isfinite(range) || !std::isfinite(lo)) {
    std::ostringstream msg;
    msg << "basis for '" << name_ << "' needs a positive finite range, got lo=" << lo << " range=" << range;
    throw DomainError(msg.str());
  }
}

bool BernsteinBasis1D::contains(double x) const noexcept {
  const double slack = kEdgeTolerance * range_;
  return x >= lo_ - slack && x <= lo_ + range_ + slack;
}

double BernsteinBasis1D::rescale(double x) const {
  if (!contains(x) || std::isnan(x)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "value " << x << " of '" << name_ << "' is outside the basis interval [" << lo_ << ", " << hi() << "]";
    throw DomainError(msg.str());
  }
  const double u = (x - lo_) / range_;
  return u < 0.0 ? 0.0 : (u > 1.0 ? 1.0 : u);
}

Eigen::VectorXd BernsteinBasis1D::eval(double x) const { return bernstein_unit(order_, rescale(x)); }

Eigen::MatrixXd BernsteinBasis1D::design(std::span<const double> xs) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(xs.size()), size());
  Buffer buf{};
  for (std::size_t t = 0; t < xs.size(); ++t) {
    bernstein_unit(order_, rescale(xs[t]), std::span<double>(buf.data(), size()));
    for (int k = 0; k < size(); ++k) out(static_cast<Eigen::Index>(t), k) = buf[k];
  }
  return out;
}

BernsteinBasis1D BernsteinBasis1D::with_order(int order) const { return {order, lo_, range_, name_}; }

SurfaceSpec::SurfaceSpec(BernsteinBasis1D ozone_basis, BernsteinBasis1D temp_basis, Eigen::VectorXd psi)
    : ozone(std::move(ozone_basis)), temp(std::move(temp_basis)), coeffs(std::move(psi)) {
  if (coeffs.size() != dimension()) {
    throw ConfigError("surface coefficient vector has length " + std::to_string(coeffs.size()) + ", expected " +
                      std::to_string(dimension()));
  }
}

double eval_surface(const SurfaceSpec& spec, double ozone, double temp) {
  const int n1 = spec.ozone.size();
  const int n2 = spec.temp.size();
  Buffer b1{}, b2{};
  bernstein_unit(spec.m1(), spec.ozone.rescale(ozone), std::span<double>(b1.data(), n1));
  bernstein_unit(spec.m2(), spec.temp.rescale(temp), std::span<double>(b2.data(), n2));
  double total = 0.0;
  for (int k = 0; k < n2; ++k) {
    double inner = 0.0;
    for (int j = 0; j < n1; ++j) inner += spec.coeffs(j + n1 * k) * b1[j];
    total += inner * b2[k];
  }
  return total;
}

double eval_dfdx1(const SurfaceSpec& spec, double ozone, double temp) {
  const int m1 = spec.m1();
  const int m2 = spec.m2();
  const double u1 = spec.ozone.rescale(ozone);
  const double u2 = spec.temp.rescale(temp);
  if (m1 == 0) return 0.0;
  Buffer b1{}, b2{};
  bernstein_unit(m1 - 1, u1, std::span<double>(b1.data(), m1));
  bernstein_unit(m2, u2, std::span<double>(b2.data(), m2 + 1));
  const int n1 = m1 + 1;
  double total = 0.0;
  for (int k = 0; k <= m2; ++k) {
    double inner = 0.0;
    for (int j = 0; j < m1; ++j) inner += (spec.coeffs(j + 1 + n1 * k) - spec.coeffs(j + n1 * k)) * b1[j];
    total += inner * b2[k];
  }
  return total * m1 / spec.ozone.range();
}

double eval_cross_deriv(const SurfaceSpec& spec, double ozone, double temp) {
  const int m1 = spec.m1();
  const int m2 = spec.m2();
  const double u1 = spec.ozone.rescale(ozone);
  const double u2 = spec.temp.rescale(temp);
  if (m1 == 0 || m2 == 0) return 0.0;
  Buffer b1{}, b2{};
  bernstein_unit(m1 - 1, u1, std::span<double>(b1.data(), m1));
  bernstein_unit(m2 - 1, u2, std::span<double>(b2.data(), m2));
  const int n1 = m1 + 1;
  const auto& c = spec.coeffs;
  double total = 0.0;
  for (int k = 0; k < m2; ++k) {
    double inner = 0.0;
    for (int j = 0; j < m1; ++j) {
      // theta_{j+1,k+1} - theta_{j+1,k} under theta = T psi.
      const double mixed = c(j + 1 + n1 * (k + 1)) - c(j + n1 * (k + 1)) - c(j + 1 + n1 * k) + c(j + n1 * k);
      inner += mixed * b1[j];
    }
    total += inner * b2[k];
  }
  return total * (static_cast<double>(m1) * m2) / (spec.ozone.range() * spec.temp.range());
}

Eigen::MatrixXd tensor_design(const BernsteinBasis1D& ozone, const BernsteinBasis1D& temp,
                              std::span<const double> ozone_values, std::span<const double> temp_values) {
  if (ozone_values.size() != temp_values.size()) {
    throw ConfigError("tensor_design: ozone and temperature series differ in length");
  }
  const int n1 = ozone.size();
  const int n2 = temp.size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ozone_values.size()), n1 * n2);
  Buffer b1{}, b2{};
  for (std::size_t t = 0; t < ozone_values.size(); ++t) {
    bernstein_unit(ozone.order(), ozone.rescale(ozone_values[t]), std::span<double>(b1.data(), n1));
    bernstein_unit(temp.order(), temp.rescale(temp_values[t]), std::span<double>(b2.data(), n2));
    const auto row = static_cast<Eigen::Index>(t);
    for (int k = 0; k < n2; ++k)
      for (int j = 0; j < n1; ++j) out(row, j + n1 * k) = b1[j] * b2[k];
  }
  return out;
}

Eigen::MatrixXd transform_matrix(int m1, int m2) {
  if (m1 < 0 || m2 < 0) throw ConfigError("transform_matrix: orders must be non-negative");
  const int n1 = m1 + 1;
  const int p = n1 * (m2 + 1);
  Eigen::MatrixXd t = Eigen::MatrixXd::Identity(p, p);
  for (int k = 0; k <= m2; ++k)
    for (int j = 1; j <= m1; ++j) t(j + n1 * k, j - 1 + n1 * k) = -1.0;
  return t;
}

Eigen::MatrixXd transform_inverse(int m1, int m2) {
  if (m1 < 0 || m2 < 0) throw ConfigError("transform_inverse: orders must be non-negative");
  const int n1 = m1 + 1;
  const int p = n1 * (m2 + 1);
  Eigen::MatrixXd inv = Eigen::MatrixXd::Zero(p, p);
  for (int k = 0; k <= m2; ++k)
    for (int j = 0; j <= m1; ++j)
      for (int l = 0; l <= j; ++l) inv(j + n1 * k, l + n1 * k) = 1.0;
  return inv;
}

Eigen::VectorXd psi_to_theta(const Eigen::VectorXd& psi, int m1, int m2) {
  const int n1 = m1 + 1;
  if (psi.size() != n1 * (m2 + 1)) throw ConfigError("psi_to_theta: length mismatch");
  Eigen::VectorXd theta = psi;
  for (int k = 0; k <= m2; ++k)
    for (int j = 1; j <= m1; ++j) theta(j + n1 * k) = psi(j + n1 * k) - psi(j - 1 + n1 * k);
  return theta;
}

Eigen::VectorXd theta_to_psi(const Eigen::VectorXd& theta, int m1, int m2) {
  const int n1 = m1 + 1;
  if (theta.size() != n1 * (m2 + 1)) throw ConfigError("theta_to_psi: length mismatch");
  Eigen::VectorXd psi = theta;
  for (int k = 0; k <= m2; ++k)
    for (int j = 1; j <= m1; ++j) psi(j + n1 * k) = psi(j - 1 + n1 * k) + theta(j + n1 * k);
  return psi;
}

bool MonotoneCoeffs::in_cone() const {
  const int n1 = m1 + 1;
  for (int k = 0; k <= m2; ++k)
    for (int j = 1; j <= m1; ++j)
      if (theta(j + n1 * k) < 0.0) return false;
  return true;
}

void truncate_in_place(Eigen::Ref<Eigen::VectorXd> theta, int m1, int m2) {
  const int n1 = m1 + 1;
  if (theta.size() != n1 * (m2 + 1)) throw ConfigError("truncate_theta: length mismatch");
  for (int k = 0; k <= m2; ++k)
    for (int j = 1; j <= m1; ++j) {
      double& v = theta(j + n1 * k);
      if (v < 0.0) v = 0.0;
    }
}

MonotoneCoeffs truncate_theta(const Eigen::VectorXd& theta_star, int m1, int m2) {
  MonotoneCoeffs out{theta_star, m1, m2};
  truncate_in_place(out.theta, m1, m2);
  return out;
}

}  // namespace monosurf

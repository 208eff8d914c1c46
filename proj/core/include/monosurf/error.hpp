#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace monosurf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An input lies outside the domain an operation is defined on.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data (CSV columns, values, ordering).
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A numerical fit failed. Carries the offending column labels when the
/// failure is a rank deficiency.
class FitError : public Error {
 public:
  explicit FitError(const std::string& what, std::vector<std::string> columns = {})
      : Error(what), columns_(std::move(columns)) {}
  const std::vector<std::string>& columns() const noexcept { return columns_; }

 private:
  std::vector<std::string> columns_;
};

}  // namespace monosurf

#include <Eigen/Dense>

namespace monosurf {

/// IRLS did not converge; holds the final iterate for inspection.
class ConvergenceError : public FitError {
 public:
  ConvergenceError(const std::string& what, Eigen::VectorXd last_coefficients, double last_deviance)
      : FitError(what), coefficients_(std::move(last_coefficients)), deviance_(last_deviance) {}
  const Eigen::VectorXd& last_coefficients() const noexcept { return coefficients_; }
  double last_deviance() const noexcept { return deviance_; }

 private:
  Eigen::VectorXd coefficients_;
  double deviance_;
};

}  // namespace monosurf

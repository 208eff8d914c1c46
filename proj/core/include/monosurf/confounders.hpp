#pragma once

// Confounder design g_c(Z) = Z gamma: age-group intercepts, day-of-week
// dummies, per-age natural splines of calendar time, and natural splines of
// the weather covariates.

#include <chrono>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "monosurf/data.hpp"

namespace monosurf {

/// Natural cubic spline basis with fixed knots (boundary knots at the data
/// extremes, interior knots at equally spaced quantiles). Linear beyond the
/// boundary knots. Built from a cubic B-spline basis with the first column
/// dropped and the two boundary second-derivative constraints projected out.
class NaturalSplineBasis {
 public:
  /// Throws ConfigError when x has fewer than df + 1 distinct finite values.
  NaturalSplineBasis(std::span<const double> x, int df);

  int df() const noexcept { return df_; }
  const std::vector<double>& interior_knots() const noexcept { return interior_; }
  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }

  /// n x df design. `derivative` in {0, 1, 2}.
  Eigen::MatrixXd design(std::span<const double> x, int derivative = 0) const;

 private:
  Eigen::RowVectorXd bspline_row(double x, int derivative) const;

  int df_ = 0;
  double lower_ = 0.0;
  double upper_ = 0.0;
  std::vector<double> interior_;
  std::vector<double> knots_;      // full augmented knot vector
  Eigen::MatrixXd projection_;     // (n_bspline - 1) x df
};

/// Convenience: basis built on x, evaluated at x.
Eigen::MatrixXd natural_cubic_spline_basis(std::span<const double> x, int df);

/// Trailing running mean over positions t - window + 1 ... t. Missing entries
/// (NaN) are skipped; a window with no observed value yields NaN.
std::vector<double> running_mean(std::span<const double> x, int window);

/// Calendar-aware version: averages the observed values whose date lies in
/// [date_t - window + 1, date_t]. Dates must be increasing.
std::vector<double> running_mean(std::span<const Date> dates, std::span<const double> x, int window);

struct ConfounderConfig {
  int running_window = 3;
  double time_df_per_year = 7.0;
  int min_time_df = 7;
  int temp_rm_df = 6;
  int dewpoint_df = 3;
  int dewpoint_rm_df = 3;
  /// Natural spline of same-day temperature; 0 disables the term. Used by the
  /// additive comparison models, where temperature is not in the surface.
  int temp_df = 0;
  std::chrono::weekday reference_day = std::chrono::Sunday;
  /// Rank-check the assembled design. Stage 1 turns this off because the GLM
  /// repeats the check on the full design.
  bool check_rank = true;
};

struct ConfounderDesign {
  Eigen::MatrixXd matrix;  // (days * 3) x p, rows stacked age block by age block
  std::vector<std::string> column_labels;
  std::vector<std::pair<std::string, int>> df_map;

  Eigen::Index rows() const noexcept { return matrix.rows(); }
  Eigen::Index cols() const noexcept { return matrix.cols(); }
};

/// Years covered by the series: (last - first + 1 days) / 365.25.
double years_of_data(const CityData& city);
int time_spline_df(const CityData& city, const ConfounderConfig& cfg);

/// Builds the confounder design for a prepared city (running means attached,
/// season filter applied, complete rows only). Throws FitError listing the
/// dependent columns if the assembled design is rank deficient.
ConfounderDesign build_confounder_design(const CityData& city, const ConfounderConfig& cfg);

/// Column indices of a rank-deficient matrix that are linearly dependent on
/// earlier pivots (empty when the matrix has full column rank).
std::vector<Eigen::Index> dependent_columns(const Eigen::MatrixXd& x, double threshold = 1e-10);

}  // namespace monosurf

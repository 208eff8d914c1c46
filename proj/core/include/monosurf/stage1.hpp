#pragma once

// First-stage fits: one quasi-Poisson regression per city on a local
// Bernstein tensor basis scaled to that city's exposure ranges, with the
// confounder design alongside. The offset is log(population) plus the crude
// log death rate of the reference age group.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "monosurf/basis.hpp"
#include "monosurf/confounders.hpp"
#include "monosurf/data.hpp"
#include "monosurf/glm.hpp"

namespace monosurf {

struct GlobalRanges {
  double ozone_lo = 0.0;
  double ozone_range = 1.0;
  double temp_lo = 0.0;
  double temp_range = 1.0;

  /// Smallest rectangle holding every city's observed (ozone, temp).
  static GlobalRanges from_cities(std::span<const CityData> cities);
  BernsteinBasis1D ozone_basis(int order) const { return {order, ozone_lo, ozone_range, "ozone"}; }
  BernsteinBasis1D temp_basis(int order) const { return {order, temp_lo, temp_range, "temp"}; }
};

struct LocalOrderRule {
  int min_m1 = 6;
  int min_m2 = 4;
  /// When false the local orders equal the global ones.
  bool scale_with_range = true;
};

/// M1c = max(round(r1c M1 / r1), min_m1), M2c likewise; rounding is
/// half-to-even.
std::pair<int, int> local_orders(double r1c, double r2c, double r1, double r2, int m1, int m2,
                                 const LocalOrderRule& rule = {});

struct Stage1Config {
  int m1 = 7;
  int m2 = 9;
  LocalOrderRule orders;
  ConfounderConfig confounders;
  GlmOptions glm;
};

struct Stage1Fit {
  std::string city_id;
  LatLon location;
  std::string region;
  std::int64_t population = 0;

  BernsteinBasis1D local_ozone;
  BernsteinBasis1D local_temp;
  Eigen::VectorXd beta_hat;   // psi-ordered local surface coefficients
  Eigen::VectorXd gamma_hat;  // confounder coefficients
  std::vector<std::string> gamma_labels;
  PartitionedCovariance v;

  std::int64_t n_days = 0;  // days used in the fit
  double log_offset = 0.0;  // log(pop) + log crude reference-age rate
  double dispersion = 1.0;
  double deviance = 0.0;
  int iterations = 0;

  /// Exposures of the fitted days, for post-fit summaries.
  std::vector<double> ozone;
  std::vector<double> temp;

  int m1c() const noexcept { return local_ozone.order(); }
  int m2c() const noexcept { return local_temp.order(); }
  Eigen::Index n_beta() const noexcept { return beta_hat.size(); }
};

/// Stage-1 design for a prepared city: the local tensor basis repeated for
/// each age block, followed by the confounder design without the reference
/// age intercept (the Bernstein basis already spans the constant).
struct Stage1Design {
  Eigen::MatrixXd x;
  std::vector<std::string> labels;
  Eigen::Index n_beta = 0;
  BernsteinBasis1D local_ozone;
  BernsteinBasis1D local_temp;
};

Stage1Design stage1_design(const CityData& city, const GlobalRanges& ranges, const Stage1Config& cfg);

/// Response stacked by age block (row a * n + t), matching the design.
std::vector<double> stacked_deaths(const CityData& city);

/// Fits one prepared city. `train_days`, when non-empty, restricts the fit to
/// those day indices (bases and splines are still built from every day).
/// Errors are rethrown with the city id prefixed.
Stage1Fit fit_city(const CityData& city, const GlobalRanges& ranges, const Stage1Config& cfg,
                   std::span<const std::size_t> train_days = {});

struct Stage1Failure {
  std::string city_id;
  std::string reason;
};

struct Stage1Batch {
  GlobalRanges ranges;
  int m1 = 7;
  int m2 = 9;
  std::vector<Stage1Fit> fits;  // ordered by city id
  std::vector<Stage1Failure> failures;
};

/// Fits every city on `threads` workers. Results are ordered by input order
/// (callers pass cities sorted by id). Failed cities land in `failures`.
/// `train_days`, when non-empty, holds one index list per city.
Stage1Batch fit_cities(std::span<const CityData> cities, const Stage1Config& cfg, int threads = 1,
                       std::span<const std::vector<std::size_t>> train_days = {});

}  // namespace monosurf

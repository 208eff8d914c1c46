#pragma once

// Post-fit summaries of the posterior draws: log relative-risk and
// interaction surfaces on grids, precision-weighted pooling across cities,
// stratified high/moderate temperature comparisons and excess mortality.
//
// Log RR is reported as percent change in mortality per 10 ppb ozone:
// 1000 * df/d(ozone) with the derivative in native units. The interaction
// surface uses the same factor on the mixed derivative (per 10 ppb per degF).

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "monosurf/hier.hpp"

namespace monosurf {

inline constexpr double kLogRrScale = 1000.0;

struct Rectangle {
  double ozone_lo = 0.0;
  double ozone_hi = 0.0;
  double temp_lo = 0.0;
  double temp_hi = 0.0;

  bool contains(double ozone, double temp) const noexcept {
    return ozone >= ozone_lo && ozone <= ozone_hi && temp >= temp_lo && temp <= temp_hi;
  }
  static Rectangle of(std::span<const double> ozone, std::span<const double> temp);
  Rectangle hull(const Rectangle& other) const;
};

/// Where a city's data can inform its surface: points of the observed
/// rectangle with at least `min_days` observed days inside a box of
/// +-radius x (range) around them on both axes. Ozone and temperature are
/// strongly correlated, so whole corners of the rectangle hold no days.
struct SupportRule {
  double radius = 0.1;
  int min_days = 10;
};

class Support {
 public:
  Support() = default;
  /// Every point of the rectangle.
  static Support rectangle(const Rectangle& r);
  static Support of(std::span<const double> ozone, std::span<const double> temp, const SupportRule& rule = {});

  bool contains(double ozone, double temp) const;
  const Rectangle& bounds() const noexcept { return rect_; }

 private:
  Rectangle rect_;
  double h_ozone_ = 0.0;
  double h_temp_ = 0.0;
  int min_days_ = 0;
  std::vector<std::pair<double, double>> days_;  // sorted by ozone
};

struct GridSpec {
  std::vector<double> ozone;
  std::vector<double> temp;

  /// Equally spaced grid covering the rectangle, endpoints included.
  static GridSpec over(const Rectangle& r, int n_ozone = 101, int n_temp = 101);
  std::size_t size() const noexcept { return ozone.size() * temp.size(); }
};

struct Summary {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  double pr_gt0 = 0.0;
};

/// Mean, sd (n - 1), central 95% interval and Pr(> threshold) of draws.
Summary summarize(std::span<const double> draws, double threshold = 0.0);

/// Point (i, k) of an n_ozone x n_temp grid lives at i + n_ozone * k.
struct SurfaceGrid {
  std::string label;
  std::vector<double> ozone_grid;
  std::vector<double> temp_grid;
  std::vector<char> support;
  std::vector<Summary> values;  // meaningful where support is set

  std::size_t index(std::size_t i, std::size_t k) const noexcept { return i + ozone_grid.size() * k; }
  std::size_t size() const noexcept { return values.size(); }
};

enum class SurfaceKind { LogRr, Interaction };

/// Per-draw values of one city's surface on the grid: points x draws.
/// Points outside the global basis rectangle are left at zero.
Eigen::MatrixXd surface_draws(const PosteriorSample& post, Eigen::Index city, const GridSpec& grid, SurfaceKind kind);

/// Per-draw 1000 * dfdx1 on the grid. Points outside `support` are masked.
SurfaceGrid log_rr_surface(const PosteriorSample& post, Eigen::Index city, const GridSpec& grid,
                           const Support& support);
/// Per-draw 1000 * d2f/(dozone dtemp) on the grid.
SurfaceGrid interaction_surface(const PosteriorSample& post, Eigen::Index city, const GridSpec& grid,
                                const Support& support);

/// Inverse-variance weights summing to one; when some variances are zero
/// those entries share the weight equally.
std::vector<double> precision_weights(std::span<const double> variances);

/// Pointwise precision-weighted average over the cities whose support covers
/// each point. All cities come from the same joint chain, so the average is
/// formed draw by draw and summarized afterwards.
struct NationalDraws {
  std::vector<char> support;  // grid points covered by at least one city
  Eigen::MatrixXd draws;      // points x draws, zero off support
};
NationalDraws national_draws(const PosteriorSample& post, std::span<const Eigen::Index> cities,
                             std::span<const Support> supports, const GridSpec& grid, SurfaceKind kind);

SurfaceGrid national_surface(const PosteriorSample& post, std::span<const Eigen::Index> cities,
                             std::span<const Support> supports, const GridSpec& grid, SurfaceKind kind);

struct StratifiedConfig {
  double high_lo = 0.95, high_hi = 0.99;
  double moderate_lo = 0.50, moderate_hi = 0.75;
  double trim_lo = 0.10, trim_hi = 0.90;
};

struct StratifiedComparison {
  std::string city_id;
  std::string region;
  std::pair<double, double> high_window;      // temperature
  std::pair<double, double> moderate_window;  // temperature
  std::pair<double, double> high_ozone;       // trimmed ozone range on high days
  std::pair<double, double> moderate_ozone;   // trimmed ozone range on moderate days
  std::optional<std::pair<double, double>> common_range;
  std::size_t n_high = 0, n_moderate = 0, n_high_common = 0, n_moderate_common = 0;

  /// Per-draw mean log RR (percent per 10 ppb).
  std::vector<double> high_observed, moderate_observed, high_common, moderate_common;
  std::vector<double> ratio_observed_draws, ratio_common_draws;
  Summary ratio_observed;
  std::optional<Summary> ratio_common;  // unset when the common range is empty
  double pr_ratio_observed_gt1 = 0.0;
  double pr_ratio_common_gt1 = 0.0;
};

/// `ozone`/`temp` are the city's observed days.
StratifiedComparison stratified_ratio(const PosteriorSample& post, Eigen::Index city, std::span<const double> ozone,
                                      std::span<const double> temp, const StratifiedConfig& cfg = {});

struct ExcessMortality {
  std::string city_id;
  std::string region;
  double ozone_q50 = 0.0, ozone_q95 = 0.0, temp_q50 = 0.0, temp_q95 = 0.0;
  std::vector<double> draws;  // percent increase
  Summary summary;
};

ExcessMortality excess_mortality(const PosteriorSample& post, Eigen::Index city, std::span<const double> ozone,
                                 std::span<const double> temp);

/// Draw-level precision-weighted pool of per-city draw vectors.
struct PooledSummary {
  std::string group;
  std::size_t n_cities = 0;
  std::vector<double> weights;
  Summary summary;
};
PooledSummary pool_draws(const std::string& group, std::span<const std::vector<double>> draws);

void write_surface_csv(const SurfaceGrid& grid, const std::filesystem::path& path);

}  // namespace monosurf

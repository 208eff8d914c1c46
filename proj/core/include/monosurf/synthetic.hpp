#pragma once

// Synthetic cities with a known log-rate surface, for testing and demos.
//
// Each city's expected deaths in age group a on day t are
//   pop * rate_a * exp(f_c(ozone_t, temp_t) + dow_t + season_t + dew_t),
// where f_c is a Bernstein surface on the fixed truth rectangle
// [0, 160] ppb x [20, 110] degF and the other terms are smooth confounders
// the stage-1 design can represent.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "monosurf/basis.hpp"
#include "monosurf/data.hpp"

namespace monosurf {

enum class TruthFamily { Monotone, AdditiveLinear, AdditiveNonlinear, Interaction };

TruthFamily parse_truth_family(const std::string& name);
std::string to_string(TruthFamily family);

struct SynthSpec {
  int n_cities = 10;
  int days_per_city = 3000;  // consecutive ozone-season days
  std::uint64_t seed = 1;
  TruthFamily family = TruthFamily::Interaction;

  /// Ozone slope over the truth ozone range (log-rate units).
  double ozone_effect = 0.15;
  /// Curvature (additive-nonlinear) or interaction strength.
  double shape_effect = 0.3;
  double temp_linear = 0.05;
  double temp_quadratic = 0.15;
  /// sd of the log city multiplier applied to the ozone terms.
  double city_heterogeneity = 0.15;

  double ozone_per_degree = 0.9;  // mean ozone rise per degF
  double ozone_noise_sd = 9.0;
  double temp_noise_sd = 6.0;
  std::array<double, kAgeGroups> daily_rate = {1.5e-5, 1.2e-5, 2.5e-5};
  double population_median = 1.0e6;
  int start_year = 1987;

  /// Optional explicit truth surfaces, one per city; overrides `family`.
  std::vector<SurfaceSpec> surfaces;
};

struct CityTruth {
  std::string city_id;
  TruthFamily family = TruthFamily::Interaction;
  SurfaceSpec surface;
  double multiplier = 1.0;
  std::array<double, kAgeGroups> daily_rate{};
  std::array<double, 7> dow_effect{};  // Sunday first
  double season_amplitude = 0.0;
  double dewpoint_effect = 0.0;  // per degF around 60
};

struct SynthResult {
  std::vector<CityData> cities;  // sorted by id
  std::vector<CityTruth> truth;  // same order
};

inline constexpr double kTruthOzoneLo = 0.0, kTruthOzoneHi = 160.0;
inline constexpr double kTruthTempLo = 20.0, kTruthTempHi = 110.0;

/// Truth surface for a family on the truth rectangle, scaled by `multiplier`
/// in its ozone terms. Throws ConfigError if a monotone family leaves the cone.
SurfaceSpec truth_surface(TruthFamily family, const SynthSpec& spec, double multiplier);

SynthResult generate_synthetic(const SynthSpec& spec);

/// Expected deaths for one day and age group under the truth.
double expected_deaths(const CityTruth& truth, std::int64_t population, const DayRecord& day, int age_group,
                       Date first_day);

}  // namespace monosurf

#include "monosurf/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "monosurf/error.hpp"
#include "monosurf/random.hpp"

namespace monosurf {
namespace {

constexpr int kTruthM1 = 3;
constexpr int kTruthM2 = 3;

// Bernstein coefficient (index j of order m) of u^2.
double square_coeff(int j, int m) { return m < 2 ? 0.0 : static_cast<double>(j * (j - 1)) / (m * (m - 1)); }
double linear_coeff(int j, int m) { return static_cast<double>(j) / m; }

std::string city_name(int i, int n) {
  const int width = n >= 100 ? 3 : 2;
  char buf[16];
  std::snprintf(buf, sizeof(buf), "c%0*d", width, i + 1);
  return buf;
}

std::string region_for(LatLon p) {
  if (p.lon < -100.0) return "west";
  if (p.lon < -90.0) return "midwest";
  return p.lat >= 38.0 ? "northeast" : "southeast";
}

int day_of_year(Date d) {
  using namespace std::chrono;
  const year_month_day ymd{d};
  return (d - sys_days{ymd.year() / January / 1}).count() + 1;
}

}  // namespace

TruthFamily parse_truth_family(const std::string& name) {
  if (name == "monotone") return TruthFamily::Monotone;
  if (name == "additive-linear") return TruthFamily::AdditiveLinear;
  if (name == "additive-nonlinear") return TruthFamily::AdditiveNonlinear;
  if (name == "interaction") return TruthFamily::Interaction;
  throw ConfigError("unknown truth family '" + name +
                    "' (expected monotone, additive-linear, additive-nonlinear or interaction)");
}

std::string to_string(TruthFamily family) {
  switch (family) {
    case TruthFamily::Monotone: return "monotone";
    case TruthFamily::AdditiveLinear: return "additive-linear";
    case TruthFamily::AdditiveNonlinear: return "additive-nonlinear";
    case TruthFamily::Interaction: return "interaction";
  }
  return "unknown";
}

SurfaceSpec truth_surface(TruthFamily family, const SynthSpec& spec, double multiplier) {
  const BernsteinBasis1D oz(kTruthM1, kTruthOzoneLo, kTruthOzoneHi - kTruthOzoneLo, "ozone");
  const BernsteinBasis1D tp(kTruthM2, kTruthTempLo, kTruthTempHi - kTruthTempLo, "temp");
  Eigen::VectorXd psi((kTruthM1 + 1) * (kTruthM2 + 1));
  for (int k = 0; k <= kTruthM2; ++k) {
    const double temp_part =
        spec.temp_linear * linear_coeff(k, kTruthM2) + spec.temp_quadratic * square_coeff(k, kTruthM2);
    for (int j = 0; j <= kTruthM1; ++j) {
      double ozone_part = spec.ozone_effect * linear_coeff(j, kTruthM1);
      switch (family) {
        case TruthFamily::AdditiveLinear:
          break;
        case TruthFamily::AdditiveNonlinear:
          ozone_part += spec.shape_effect * square_coeff(j, kTruthM1);
          break;
        case TruthFamily::Interaction:
        case TruthFamily::Monotone:
          // u1^2 u2^2: cross derivative 4 u1 u2, synergistic at high ozone
          // and temperature.
          ozone_part += spec.shape_effect * square_coeff(j, kTruthM1) * square_coeff(k, kTruthM2);
          break;
      }
      psi(coeff_index(j, k, kTruthM1)) = multiplier * ozone_part + temp_part;
    }
  }
  SurfaceSpec s(oz, tp, psi);
  if (family == TruthFamily::Monotone &&
      !MonotoneCoeffs{psi_to_theta(psi, kTruthM1, kTruthM2), kTruthM1, kTruthM2}.in_cone()) {
    throw ConfigError("truth surface for family " + to_string(family) + " is not monotone in ozone");
  }
  return s;
}

double expected_deaths(const CityTruth& truth, std::int64_t population, const DayRecord& day, int age_group,
                       Date first_day) {
  using namespace std::chrono;
  const double f = eval_surface(truth.surface, day.ozone, day.temp);
  const double years = static_cast<double>((day.date - first_day).count()) / 365.25;
  const double season =
      truth.season_amplitude * std::cos(2.0 * std::numbers::pi * (day_of_year(day.date) - 196) / 365.25) +
      0.01 * years;
  const double dow = truth.dow_effect[weekday{day.date}.c_encoding()];
  const double dew = truth.dewpoint_effect * (day.dewpoint - 60.0);
  return static_cast<double>(population) * truth.daily_rate[static_cast<std::size_t>(age_group)] *
         std::exp(f + season + dow + dew);
}

SynthResult generate_synthetic(const SynthSpec& spec) {
  using namespace std::chrono;
  if (spec.n_cities < 1) throw ConfigError("synthetic spec needs at least one city");
  if (spec.days_per_city < 30) throw ConfigError("synthetic spec needs at least 30 days per city");
  if (!spec.surfaces.empty() && static_cast<int>(spec.surfaces.size()) != spec.n_cities) {
    throw ConfigError("explicit truth surfaces must be given for every city");
  }

  SynthResult out;
  for (int c = 0; c < spec.n_cities; ++c) {
    Rng rng(derive_seed(spec.seed, "synthetic-city", static_cast<std::uint64_t>(c)));
    CityData city;
    city.city_id = city_name(c, spec.n_cities);
    city.location = {30.0 + 17.0 * uniform01(rng), -122.0 + 50.0 * uniform01(rng)};
    city.region = region_for(city.location);
    city.population =
        static_cast<std::int64_t>(std::llround(spec.population_median * std::exp(0.5 * standard_normal(rng))));

    CityTruth truth;
    truth.city_id = city.city_id;
    truth.family = spec.family;
    truth.multiplier = std::exp(spec.city_heterogeneity * standard_normal(rng));
    if (spec.surfaces.empty()) {
      truth.surface = truth_surface(spec.family, spec, truth.multiplier);
    } else {
      truth.surface = spec.surfaces[static_cast<std::size_t>(c)];
      if (spec.family == TruthFamily::Monotone &&
          !MonotoneCoeffs{psi_to_theta(truth.surface.coeffs, truth.surface.m1(), truth.surface.m2()),
                          truth.surface.m1(), truth.surface.m2()}
               .in_cone()) {
        throw ConfigError("explicit truth surface for " + city.city_id + " is not monotone in ozone");
      }
    }
    truth.daily_rate = spec.daily_rate;
    for (int w = 1; w < 7; ++w) truth.dow_effect[static_cast<std::size_t>(w)] = 0.03 * standard_normal(rng);
    truth.season_amplitude = 0.05 + 0.05 * uniform01(rng);
    truth.dewpoint_effect = 0.002 * standard_normal(rng);

    const double temp_mean = 62.0 + 16.0 * uniform01(rng);
    const double temp_amp = 8.0 + 6.0 * uniform01(rng);
    const double ozone_base = 20.0 + 15.0 * uniform01(rng);
    constexpr double kPhi = 0.7;
    const double innov = std::sqrt(1.0 - kPhi * kPhi);
    double temp_ar = spec.temp_noise_sd * standard_normal(rng);
    double ozone_ar = spec.ozone_noise_sd * standard_normal(rng);

    Date d = sys_days{year{spec.start_year} / April / 1};
    for (int t = 0; t < spec.days_per_city; ++t) {
      if (!in_ozone_season(d)) d = sys_days{(year_month_day{d}.year() + years{1}) / April / 1};
      DayRecord day;
      day.date = d;
      const double season_pos = std::sin(std::numbers::pi * (day_of_year(d) - 91) / 214.0);
      temp_ar = kPhi * temp_ar + innov * spec.temp_noise_sd * standard_normal(rng);
      ozone_ar = kPhi * ozone_ar + innov * spec.ozone_noise_sd * standard_normal(rng);
      day.temp = std::clamp(temp_mean + temp_amp * season_pos + temp_ar, 25.0, 105.0);
      day.ozone = std::clamp(ozone_base + spec.ozone_per_degree * (day.temp - 60.0) + ozone_ar, 2.0, 155.0);
      day.dewpoint = std::clamp(day.temp - 12.0 + 4.0 * standard_normal(rng), -10.0, 90.0);
      city.days.push_back(day);
      d += days{1};
    }

    const Date first = city.days.front().date;
    for (auto& day : city.days)
      for (int a = 0; a < kAgeGroups; ++a) {
        const double mu = expected_deaths(truth, city.population, day, a, first);
        day.deaths[static_cast<std::size_t>(a)] = static_cast<double>(std::poisson_distribution<long>(mu)(rng));
      }
    out.cities.push_back(std::move(city));
    out.truth.push_back(std::move(truth));
  }
  return out;
}

}  // namespace monosurf

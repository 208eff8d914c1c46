#include "monosurf/stage1.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <optional>
#include <thread>

#include "monosurf/error.hpp"

namespace monosurf {
namespace {

struct Extent {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
};

std::pair<Extent, Extent> city_extent(const CityData& city) {
  Extent oz, tp;
  for (const auto& d : city.days) {
    oz.add(d.ozone);
    tp.add(d.temp);
  }
  return {oz, tp};
}

int scaled_order(double rc, double r, int m, int floor_order) {
  const int scaled = static_cast<int>(std::nearbyint(rc * m / r));
  return std::max(scaled, floor_order);
}

}  // namespace

GlobalRanges GlobalRanges::from_cities(std::span<const CityData> cities) {
  Extent oz, tp;
  for (const auto& c : cities) {
    const auto [o, t] = city_extent(c);
    oz.add(o.lo);
    oz.add(o.hi);
    tp.add(t.lo);
    tp.add(t.hi);
  }
  if (!(oz.hi > oz.lo) || !(tp.hi > tp.lo)) {
    throw DomainError("global exposure ranges are degenerate; need varying ozone and temperature");
  }
  return {oz.lo, oz.hi - oz.lo, tp.lo, tp.hi - tp.lo};
}

std::pair<int, int> local_orders(double r1c, double r2c, double r1, double r2, int m1, int m2,
                                 const LocalOrderRule& rule) {
  if (!(r1c > 0.0 && r2c > 0.0 && r1 > 0.0 && r2 > 0.0)) {
    throw DomainError("local_orders: ranges must be positive");
  }
  if (!rule.scale_with_range) return {m1, m2};
  return {scaled_order(r1c, r1, m1, rule.min_m1), scaled_order(r2c, r2, m2, rule.min_m2)};
}

std::vector<double> stacked_deaths(const CityData& city) {
  const std::size_t n = city.days.size();
  std::vector<double> y(kAgeGroups * n);
  for (int a = 0; a < kAgeGroups; ++a)
    for (std::size_t t = 0; t < n; ++t) y[a * n + t] = city.days[t].deaths[static_cast<std::size_t>(a)];
  return y;
}

Stage1Design stage1_design(const CityData& city, const GlobalRanges& ranges, const Stage1Config& cfg) {
  const auto [oz, tp] = city_extent(city);
  if (city.days.empty()) throw ConfigError("city " + city.city_id + " has no days");
  if (!(oz.hi > oz.lo)) throw DomainError("city " + city.city_id + ": ozone is constant, local basis has zero range");
  if (!(tp.hi > tp.lo)) {
    throw DomainError("city " + city.city_id + ": temperature is constant, local basis has zero range");
  }
  const auto [m1c, m2c] =
      local_orders(oz.hi - oz.lo, tp.hi - tp.lo, ranges.ozone_range, ranges.temp_range, cfg.m1, cfg.m2, cfg.orders);

  Stage1Design out;
  out.local_ozone = BernsteinBasis1D(m1c, oz.lo, oz.hi - oz.lo, "ozone");
  out.local_temp = BernsteinBasis1D(m2c, tp.lo, tp.hi - tp.lo, "temp");
  const auto ozone = city.ozone();
  const auto temp = city.temp();
  const Eigen::MatrixXd surface = tensor_design(out.local_ozone, out.local_temp, ozone, temp);
  out.n_beta = surface.cols();

  ConfounderConfig ccfg = cfg.confounders;
  ccfg.check_rank = false;
  const ConfounderDesign conf = build_confounder_design(city, ccfg);

  const auto n = static_cast<Eigen::Index>(city.days.size());
  const Eigen::Index p_conf = conf.cols() - 1;  // reference age intercept dropped
  out.x.resize(kAgeGroups * n, out.n_beta + p_conf);
  for (int a = 0; a < kAgeGroups; ++a) out.x.block(a * n, 0, n, out.n_beta) = surface;
  out.x.rightCols(p_conf) = conf.matrix.rightCols(p_conf);

  for (int k = 0; k <= m2c; ++k)
    for (int j = 0; j <= m1c; ++j) out.labels.push_back("surface_" + std::to_string(j) + "_" + std::to_string(k));
  out.labels.insert(out.labels.end(), conf.column_labels.begin() + 1, conf.column_labels.end());
  return out;
}

Stage1Fit fit_city(const CityData& city, const GlobalRanges& ranges, const Stage1Config& cfg,
                   std::span<const std::size_t> train_days) {
  try {
    Stage1Design design = stage1_design(city, ranges, cfg);
    const std::vector<double> y_all = stacked_deaths(city);
    const std::size_t n = city.days.size();
    if (city.population <= 0) throw DomainError("population must be positive");
    // The offset carries log(pop) plus the crude log rate of the reference
    // age group over the fitted days, so the surface level starts near zero.
    const auto log_offset = [&](auto&& days) {
      double deaths = 0.0;
      std::size_t count = 0;
      for (const std::size_t t : days) {
        deaths += y_all[t];
        ++count;
      }
      return std::log(static_cast<double>(city.population)) +
             std::log(std::max(deaths, 0.5) / (static_cast<double>(count) * static_cast<double>(city.population)));
    };

    Stage1Fit fit;
    GlmFit glm;
    if (train_days.empty()) {
      if (static_cast<Eigen::Index>(n) <= design.n_beta) {
        throw ConfigError("needs more days (" + std::to_string(n) + ") than surface coefficients (" +
                          std::to_string(design.n_beta) + ")");
      }
      std::vector<std::size_t> all(n);
      std::iota(all.begin(), all.end(), std::size_t{0});
      fit.log_offset = log_offset(all);
      const std::vector<double> offset(y_all.size(), fit.log_offset);
      glm = fit_poisson_quasi(y_all, design.x, offset, cfg.glm, design.labels);
      fit.ozone = city.ozone();
      fit.temp = city.temp();
      fit.n_days = static_cast<std::int64_t>(n);
    } else {
      const std::size_t m = train_days.size();
      if (static_cast<Eigen::Index>(m) <= design.n_beta) {
        throw ConfigError("needs more training days (" + std::to_string(m) + ") than surface coefficients (" +
                          std::to_string(design.n_beta) + ")");
      }
      Eigen::MatrixXd x(kAgeGroups * static_cast<Eigen::Index>(m), design.x.cols());
      std::vector<double> y(kAgeGroups * m);
      for (int a = 0; a < kAgeGroups; ++a)
        for (std::size_t i = 0; i < m; ++i) {
          const std::size_t t = train_days[i];
          if (t >= n) throw ConfigError("training day index out of range");
          x.row(static_cast<Eigen::Index>(a * m + i)) = design.x.row(static_cast<Eigen::Index>(a * n + t));
          y[a * m + i] = y_all[a * n + t];
        }
      fit.log_offset = log_offset(train_days);
      const std::vector<double> offset(y.size(), fit.log_offset);
      glm = fit_poisson_quasi(y, x, offset, cfg.glm, design.labels);
      for (auto t : train_days) {
        fit.ozone.push_back(city.days[t].ozone);
        fit.temp.push_back(city.days[t].temp);
      }
      fit.n_days = static_cast<std::int64_t>(m);
    }

    fit.city_id = city.city_id;
    fit.location = city.location;
    fit.region = city.region;
    fit.population = city.population;
    fit.local_ozone = design.local_ozone;
    fit.local_temp = design.local_temp;
    fit.beta_hat = glm.coefficients.head(design.n_beta);
    fit.gamma_hat = glm.coefficients.tail(glm.coefficients.size() - design.n_beta);
    fit.gamma_labels.assign(design.labels.begin() + design.n_beta, design.labels.end());
    fit.v = partition_covariance(glm, design.n_beta);
    fit.dispersion = glm.dispersion;
    fit.deviance = glm.deviance;
    fit.iterations = glm.iterations;
    return fit;
  } catch (const FitError& e) {
    throw FitError("city " + city.city_id + ": " + e.what(), e.columns());
  } catch (const ConfigError& e) {
    throw ConfigError("city " + city.city_id + ": " + e.what());
  } catch (const DomainError& e) {
    throw DomainError("city " + city.city_id + ": " + e.what());
  } catch (const SchemaError& e) {
    throw SchemaError("city " + city.city_id + ": " + e.what());
  }
}

Stage1Batch fit_cities(std::span<const CityData> cities, const Stage1Config& cfg, int threads,
                       std::span<const std::vector<std::size_t>> train_days) {
  if (!train_days.empty() && train_days.size() != cities.size()) {
    throw ConfigError("fit_cities: one training index list per city expected");
  }
  Stage1Batch batch;
  batch.ranges = GlobalRanges::from_cities(cities);
  batch.m1 = cfg.m1;
  batch.m2 = cfg.m2;

  const std::size_t n = cities.size();
  std::vector<std::optional<Stage1Fit>> results(n);
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        const std::span<const std::size_t> rows =
            train_days.empty() ? std::span<const std::size_t>{} : std::span<const std::size_t>(train_days[i]);
        results[i] = fit_city(cities[i], batch.ranges, cfg, rows);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int n_workers = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (results[i]) {
      batch.fits.push_back(std::move(*results[i]));
    } else {
      batch.failures.push_back({cities[i].city_id, errors[i]});
    }
  }
  return batch;
}

}  // namespace monosurf

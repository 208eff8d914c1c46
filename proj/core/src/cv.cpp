#include "monosurf/cv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "monosurf/error.hpp"
#include "monosurf/format.hpp"
#include "monosurf/random.hpp"
#include "monosurf/stats.hpp"

namespace monosurf {
namespace {

struct VariantSetup {
  bool spatial = true;
  bool truncate = true;
  // Key of the first-stage design this variant trains on.
  int design = 0;
};

VariantSetup setup_for(ModelVariant v) {
  switch (v) {
    case ModelVariant::SpatialMonotone: return {true, true, 0};
    case ModelVariant::NonspatialMonotone: return {false, true, 0};
    case ModelVariant::SpatialUnconstrained: return {true, false, 0};
    case ModelVariant::NonspatialUnconstrained: return {false, false, 0};
    case ModelVariant::AdditiveNonlinear: return {false, false, 1};
    case ModelVariant::AdditiveLinear: return {false, false, 2};
  }
  throw ConfigError("unknown model variant");
}

Stage1Config design_config(int design, const CvConfig& cfg) {
  Stage1Config s = cfg.stage1;
  if (design == 0) return s;
  // Additive designs: 1-D ozone polynomial (a constant temperature basis) and
  // a temperature spline among the confounders.
  s.m1 = design == 1 ? cfg.additive_ozone_order : 1;
  s.m2 = 0;
  s.orders.scale_with_range = false;
  s.confounders.temp_df = cfg.additive_temp_df;
  return s;
}

std::array<double, 2> p95(const CityData& city) {
  return {quantile(city.ozone(), 0.95), quantile(city.temp(), 0.95)};
}

}  // namespace

HoldoutSplit split_holdout(const CityData& city, double fraction, std::uint64_t seed, bool contiguous) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("holdout training fraction must lie in (0, 1)");
  const std::size_t n = city.days.size();
  const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n) {
    throw ConfigError("city " + city.city_id + ": a training fraction of " + format_number(fraction) + " over " +
                      std::to_string(n) + " days leaves an empty partition");
  }
  Rng rng(derive_seed(seed, "holdout:" + city.city_id, n));
  HoldoutSplit s;
  if (contiguous) {
    const std::size_t n_test = n - n_train;
    const auto start = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n_train + 1));
    for (std::size_t t = 0; t < n; ++t) (t >= start && t < start + n_test ? s.test : s.train).push_back(t);
    return s;
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Fisher-Yates with our own uniform draws so the split does not depend on
  // the standard library's distribution implementations.
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = std::min(i, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1)));
    std::swap(idx[i], idx[j]);
  }
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

double holdout_deviance(std::span<const double> y_hat, std::span<const double> y) {
  if (y_hat.size() != y.size()) throw ConfigError("holdout_deviance: prediction and count lengths differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y_hat[i] > 0.0) || !std::isfinite(y_hat[i])) {
      throw DomainError("holdout_deviance: prediction " + std::to_string(i) + " is not strictly positive");
    }
    acc += 2.0 * (y_hat[i] - y[i] * std::log(y_hat[i]) + std::lgamma(y[i] + 1.0));
  }
  return acc;
}

ModelVariant parse_variant(const std::string& name) {
  for (auto v : kAllVariants)
    if (to_string(v) == name) return v;
  throw ConfigError("unknown model variant '" + name +
                    "' (expected spatial-monotone, nonspatial-monotone, spatial-unconstrained, "
                    "nonspatial-unconstrained, additive-nonlinear or additive-linear)");
}

std::string to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::SpatialMonotone: return "spatial-monotone";
    case ModelVariant::NonspatialMonotone: return "nonspatial-monotone";
    case ModelVariant::SpatialUnconstrained: return "spatial-unconstrained";
    case ModelVariant::NonspatialUnconstrained: return "nonspatial-unconstrained";
    case ModelVariant::AdditiveNonlinear: return "additive-nonlinear";
    case ModelVariant::AdditiveLinear: return "additive-linear";
  }
  return "unknown";
}

bool is_additive(ModelVariant v) noexcept {
  return v == ModelVariant::AdditiveNonlinear || v == ModelVariant::AdditiveLinear;
}

double CvReport::difference(std::size_t r, TailSubset subset) const {
  const auto& base = row(ModelVariant::AdditiveLinear);
  const auto k = static_cast<std::size_t>(subset);
  return rows.at(r).deviance[k] - base.deviance[k];
}

const CvRow& CvReport::row(ModelVariant v) const {
  for (const auto& r : rows)
    if (r.variant == v) return r;
  throw ConfigError("CV report has no " + to_string(v) + " row");
}

CvReport run_cv(std::span<const CityData> cities, ModelVariant variant, const CvConfig& cfg) {
  const ModelVariant one[] = {variant};
  return run_cv(cities, one, cfg);
}

CvReport run_cv(std::span<const CityData> cities, std::span<const ModelVariant> variants, const CvConfig& cfg) {
  if (cities.empty()) throw ConfigError("cross-validation needs at least one city");
  if (variants.empty()) throw ConfigError("cross-validation needs at least one model variant");

  std::vector<HoldoutSplit> splits;
  std::vector<std::vector<std::size_t>> train;
  for (const auto& c : cities) {
    splits.push_back(split_holdout(c, cfg.fraction, cfg.seed, cfg.contiguous));
    train.push_back(splits.back().train);
  }
  const GlobalRanges ranges = GlobalRanges::from_cities(cities);

  struct DesignFits {
    Stage1Config scfg;
    Stage1Batch batch;
    HierModel model;
  };
  std::map<int, DesignFits> designs;
  auto design_for = [&](int key) -> DesignFits& {
    auto it = designs.find(key);
    if (it != designs.end()) return it->second;
    DesignFits d;
    d.scfg = design_config(key, cfg);
    d.batch = fit_cities(cities, d.scfg, cfg.threads, train);
    if (!d.batch.failures.empty()) {
      const auto& f = d.batch.failures.front();
      throw FitError("cross-validation stage 1 failed for " + f.city_id + ": " + f.reason);
    }
    d.model = HierModel::from_stage1(d.batch, cfg.chain.repair_covariance);
    return designs.emplace(key, std::move(d)).first->second;
  };

  CvReport report;
  report.seed = cfg.seed;
  report.fraction = cfg.fraction;
  report.contiguous = cfg.contiguous;

  for (const auto v : variants) {
    const VariantSetup setup = setup_for(v);
    DesignFits& d = design_for(setup.design);
    ChainConfig chain = cfg.chain;
    chain.spatial = setup.spatial;
    chain.truncate = setup.truncate;
    // Same chain seed for every variant on a split.
    chain.seed = derive_seed(cfg.seed, "cv-chain");
    const PosteriorSample post = run_chain(d.model, cfg.priors, chain);

    CvRow row;
    row.variant = v;
    for (std::size_t c = 0; c < cities.size(); ++c) {
      const CityData& city = cities[c];
      const Stage1Fit& fit = d.batch.fits[c];
      const CityTerms& terms = d.model.cities[c];
      const Eigen::VectorXd theta_bar = post.theta_mean(static_cast<Eigen::Index>(c));
      const Eigen::VectorXd beta = terms.a * theta_bar;
      const Eigen::VectorXd gamma = gamma_posterior_mean(fit, terms.a, theta_bar);
      Eigen::VectorXd coef(beta.size() + gamma.size());
      coef << beta, gamma;

      const Stage1Design design = stage1_design(city, ranges, d.scfg);
      const std::vector<double> y_all = stacked_deaths(city);
      const auto cut = p95(city);
      const std::size_t n = city.days.size();

      std::array<std::vector<double>, kTailSubsets> y_hat, y;
      for (int a = 0; a < kAgeGroups; ++a)
        for (const std::size_t t : splits[c].test) {
          const std::size_t r = static_cast<std::size_t>(a) * n + t;
          const double mu = std::exp(fit.log_offset + design.x.row(static_cast<Eigen::Index>(r)).dot(coef));
          const bool hi_o = city.days[t].ozone > cut[0];
          const bool hi_t = city.days[t].temp > cut[1];
          const bool in[kTailSubsets] = {true, hi_o, hi_t, hi_o && hi_t};
          for (int k = 0; k < kTailSubsets; ++k)
            if (in[k]) {
              y_hat[static_cast<std::size_t>(k)].push_back(mu);
              y[static_cast<std::size_t>(k)].push_back(y_all[r]);
            }
        }
      for (std::size_t k = 0; k < kTailSubsets; ++k) {
        row.deviance[k] += holdout_deviance(y_hat[k], y[k]);
        row.n_obs[k] += static_cast<std::int64_t>(y[k].size());
      }
    }
    report.rows.push_back(row);
  }
  return report;
}

void write_cv_csv(const CvReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  const bool has_base = std::any_of(report.rows.begin(), report.rows.end(),
                                    [](const CvRow& r) { return r.variant == ModelVariant::AdditiveLinear; });
  out << "model,overall,ozone_tail,temp_tail,both,deviance_overall,deviance_ozone_tail,deviance_temp_tail,"
         "deviance_both,n_overall,n_ozone_tail,n_temp_tail,n_both,seed,fraction,split\n";
  for (std::size_t r = 0; r < report.rows.size(); ++r) {
    const auto& row = report.rows[r];
    out << to_string(row.variant);
    for (int k = 0; k < kTailSubsets; ++k)
      out << ',' << (has_base ? format_number(report.difference(r, static_cast<TailSubset>(k))) : "NA");
    for (double d : row.deviance) out << ',' << format_number(d);
    for (auto n : row.n_obs) out << ',' << n;
    out << ',' << report.seed << ',' << format_number(report.fraction) << ','
        << (report.contiguous ? "contiguous" : "random") << '\n';
  }
}

}  // namespace monosurf

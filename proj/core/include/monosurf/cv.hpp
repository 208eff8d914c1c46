#pragma once

// Single-split holdout comparison of the surface model against its
// unconstrained, non-spatial and additive alternatives.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "monosurf/data.hpp"
#include "monosurf/hier.hpp"
#include "monosurf/stage1.hpp"

namespace monosurf {

struct HoldoutSplit {
  std::vector<std::size_t> train;  // sorted day indices
  std::vector<std::size_t> test;
};

/// Uniform random day-level split, or one contiguous test block when
/// `contiguous` is set. The split depends only on (seed, city id, n days).
HoldoutSplit split_holdout(const CityData& city, double fraction, std::uint64_t seed, bool contiguous = false);

/// Sum of 2[y_hat - y log y_hat + lgamma(y + 1)], i.e. -2 x Poisson log-likelihood.
double holdout_deviance(std::span<const double> y_hat, std::span<const double> y);

enum class ModelVariant {
  SpatialMonotone,
  NonspatialMonotone,
  SpatialUnconstrained,
  NonspatialUnconstrained,
  AdditiveNonlinear,
  AdditiveLinear,
};

inline constexpr std::array<ModelVariant, 6> kAllVariants = {
    ModelVariant::SpatialMonotone,         ModelVariant::NonspatialMonotone, ModelVariant::SpatialUnconstrained,
    ModelVariant::NonspatialUnconstrained, ModelVariant::AdditiveNonlinear,  ModelVariant::AdditiveLinear,
};

ModelVariant parse_variant(const std::string& name);
std::string to_string(ModelVariant v);
bool is_additive(ModelVariant v) noexcept;

struct CvConfig {
  double fraction = 0.8;
  std::uint64_t seed = 1;
  bool contiguous = false;
  /// Surface variants use these orders; additive ones override the surface
  /// part and add a same-day temperature spline.
  Stage1Config stage1;
  Hyperpriors priors;
  ChainConfig chain;
  int additive_ozone_order = 4;
  int additive_temp_df = 6;
  int threads = 1;
};

enum class TailSubset { Overall = 0, OzoneTail = 1, TempTail = 2, Both = 3 };
inline constexpr int kTailSubsets = 4;

struct CvRow {
  ModelVariant variant = ModelVariant::SpatialMonotone;
  std::array<double, kTailSubsets> deviance{};
  std::array<std::int64_t, kTailSubsets> n_obs{};
};

struct CvReport {
  std::uint64_t seed = 0;
  double fraction = 0.8;
  bool contiguous = false;
  std::vector<CvRow> rows;

  /// Row deviance minus the additive-linear row on the same subset.
  /// Throws ConfigError when the baseline is absent.
  double difference(std::size_t row, TailSubset subset) const;
  const CvRow& row(ModelVariant v) const;
};

/// Trains one variant on the split of every city and scores the holdout days.
/// Cities must be prepared (running means attached, season filtered).
CvReport run_cv(std::span<const CityData> cities, ModelVariant variant, const CvConfig& cfg);

/// All requested variants on one shared split. Stage-1 fits are shared
/// between variants that use the same first-stage design.
CvReport run_cv(std::span<const CityData> cities, std::span<const ModelVariant> variants, const CvConfig& cfg);

/// Rows = models; difference columns first (additive-linear baseline),
/// then raw deviances, observation counts and the split specification.
void write_cv_csv(const CvReport& report, const std::filesystem::path& path);

}  // namespace monosurf

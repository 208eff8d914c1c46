#pragma once

// On-disk formats.
//
// stage1.json      Stage1Batch: global ranges and orders, one record per
//                  fitted city (bases, beta_hat, gamma_hat with labels, the
//                  four covariance blocks row-major, exposures), failures.
// truth.json       synthetic ground truth, one SurfaceSpec per city.
// posterior.csv    one row per retained draw per city:
//                    draw,city_id,theta_0..theta_{P-1},mu0,tau,rho,log_lik
// posterior.json   chain metadata (orders, global bases, settings, counters).

#include <filesystem>
#include <span>

#include "monosurf/hier.hpp"
#include "monosurf/stage1.hpp"
#include "monosurf/synthetic.hpp"

namespace monosurf {

void save_stage1(const Stage1Batch& batch, const std::filesystem::path& path);
Stage1Batch load_stage1(const std::filesystem::path& path);

void save_truth(std::span<const CityTruth> truth, const std::filesystem::path& path);
std::vector<CityTruth> load_truth(const std::filesystem::path& path);

/// Writes `<stem>.csv` (draws) and `<stem>.json` (metadata).
void save_posterior(const PosteriorSample& post, const std::filesystem::path& stem);
PosteriorSample load_posterior(const std::filesystem::path& stem);

}  // namespace monosurf

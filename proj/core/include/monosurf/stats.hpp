#pragma once

#include <span>
#include <vector>

namespace monosurf {

/// log of the standard normal CDF, accurate far into the lower tail.
double log_norm_cdf(double z);
double norm_cdf(double z);

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). `p` in [0, 1]. Input need not be sorted.
double quantile(std::span<const double> values, double p);
/// Same as `quantile` on an already sorted range.
double quantile_sorted(std::span<const double> sorted, double p);

double mean(std::span<const double> values);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double stddev(std::span<const double> values);

/// Monte Carlo standard error of the mean of a (possibly autocorrelated)
/// chain using non-overlapping batch means.
double batch_means_se(std::span<const double> chain, int n_batches = 50);

/// Effective sample size implied by batch means.
double effective_sample_size(std::span<const double> chain, int n_batches = 50);

}  // namespace monosurf

#include "monosurf/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "monosurf/error.hpp"

namespace monosurf {

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double log_norm_cdf(double z) {
  if (z > -30.0) return std::log(norm_cdf(z));
  // Asymptotic expansion of the Mills ratio for the far lower tail.
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2) + 105.0 / (z2 * z2 * z2 * z2);
  return -0.5 * z2 - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(-z) + std::log(series);
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DomainError("quantile of an empty range");
  if (p <= 0.0) return sorted.front();
  if (p >= 1.0) return sorted.back();
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::span<const double> values, double p) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return quantile_sorted(sorted, p);
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double stddev(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double batch_means_se(std::span<const double> chain, int n_batches) {
  const auto n = chain.size();
  if (n_batches < 2 || n < static_cast<std::size_t>(2 * n_batches)) return stddev(chain) / std::sqrt(double(n));
  const std::size_t batch = n / static_cast<std::size_t>(n_batches);
  std::vector<double> means(static_cast<std::size_t>(n_batches));
  for (int b = 0; b < n_batches; ++b) means[b] = mean(chain.subspan(b * batch, batch));
  return stddev(means) / std::sqrt(static_cast<double>(n_batches));
}

double effective_sample_size(std::span<const double> chain, int n_batches) {
  const double se = batch_means_se(chain, n_batches);
  const double sd = stddev(chain);
  if (se <= 0.0) return static_cast<double>(chain.size());
  return std::min(static_cast<double>(chain.size()), (sd * sd) / (se * se));
}

}  // namespace monosurf

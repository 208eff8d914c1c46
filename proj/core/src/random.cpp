#include "monosurf/random.hpp"

#include <cmath>

#include "monosurf/error.hpp"

namespace monosurf {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Standardised lower-tail truncation: Z ~ N(0,1) conditioned on Z >= a.
double std_truncated_lower(Rng& rng, double a) {
  if (a <= 0.45) {
    for (;;) {
      const double z = standard_normal(rng);
      if (z >= a) return z;
    }
  }
  // Exponential proposal with the optimal rate (Robert, 1995).
  const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double z = a - std::log(uniform01(rng)) / lambda;
    const double rho = std::exp(-0.5 * (z - lambda) * (z - lambda));
    if (uniform01(rng) <= rho) return z;
  }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
  return splitmix64(splitmix64(seed ^ fnv1a(tag)) + index * 0x9e3779b97f4a7c15ULL);
}

double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

double uniform01(Rng& rng) {
  // (0, 1): never returns an exact zero, so log(u) is finite.
  for (;;) {
    const double u = std::generate_canonical<double, 53>(rng);
    if (u > 0.0) return u;
  }
}

double gamma_draw(Rng& rng, double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) throw DomainError("gamma_draw: shape and rate must be positive");
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

double chi_squared_draw(Rng& rng, double df) { return 2.0 * gamma_draw(rng, 0.5 * df, 1.0); }

double truncated_normal_lower(Rng& rng, double mean, double sd, double lower) {
  return mean + sd * std_truncated_lower(rng, (lower - mean) / sd);
}

double truncated_normal_upper(Rng& rng, double mean, double sd, double upper) {
  return mean - sd * std_truncated_lower(rng, (mean - upper) / sd);
}

}  // namespace monosurf

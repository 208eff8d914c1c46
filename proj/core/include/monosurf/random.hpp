#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace monosurf {

using Rng = std::mt19937_64;

/// Derives an independent sub-seed from a top-level seed, a purpose tag and
/// an index. splitmix64 over (seed, fnv1a(tag), index); stable across runs.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);

double standard_normal(Rng& rng);
double uniform01(Rng& rng);
double gamma_draw(Rng& rng, double shape, double rate);
double chi_squared_draw(Rng& rng, double df);

/// Draw from N(mean, sd^2) truncated to [lower, +inf).
double truncated_normal_lower(Rng& rng, double mean, double sd, double lower);
/// Draw from N(mean, sd^2) truncated to (-inf, upper].
double truncated_normal_upper(Rng& rng, double mean, double sd, double upper);

}  // namespace monosurf

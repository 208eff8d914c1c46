#include <benchmark/benchmark.h>

#include "monosurf/glm.hpp"
#include "monosurf/random.hpp"
#include "monosurf/stage1.hpp"
#include "monosurf/synthetic.hpp"

namespace {

using namespace monosurf;

void BM_PoissonIrls(benchmark::State& state) {
  const auto n = state.range(0), p = state.range(1);
  Rng rng(3);
  Eigen::MatrixXd x(n, p);
  std::vector<double> y(static_cast<std::size_t>(n)), offset(static_cast<std::size_t>(n), std::log(50.0));
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < p; ++j) x(i, j) = 0.1 * standard_normal(rng);
    y[static_cast<std::size_t>(i)] = static_cast<double>(std::poisson_distribution<long>(50.0)(rng));
  }
  for (auto _ : state) benchmark::DoNotOptimize(fit_poisson_quasi(y, x, offset));
}
BENCHMARK(BM_PoissonIrls)->Args({9000, 20})->Args({9000, 120})->Unit(benchmark::kMillisecond);

void BM_FitCity(benchmark::State& state) {
  SynthSpec spec;
  spec.n_cities = 1;
  spec.days_per_city = static_cast<int>(state.range(0));
  std::vector<CityData> cities = {prepare_city(generate_synthetic(spec).cities[0], 3)};
  const GlobalRanges ranges = GlobalRanges::from_cities(cities);
  for (auto _ : state) benchmark::DoNotOptimize(fit_city(cities[0], ranges, Stage1Config{}));
}
BENCHMARK(BM_FitCity)->Arg(1500)->Arg(3000)->Unit(benchmark::kMillisecond);

}  // namespace

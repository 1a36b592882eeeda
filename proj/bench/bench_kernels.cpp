#include <benchmark/benchmark.h>

#include <cstddef>
#include <vector>

#include "ewmb/critical_value.hpp"
#include "ewmb/moments.hpp"
#include "ewmb/policy.hpp"
#include "ewmb/rng.hpp"
#include "ewmb/scoring.hpp"

namespace {

std::vector<ewmb::ScoredRecord> synthetic_scores(std::size_t n) {
  std::vector<ewmb::ScoredRecord> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].gamma_star = ewmb::rng::normal(7, i, 0);
    out[i].r_star = 1.0 + ewmb::rng::normal(7, i, 1);
    out[i].x.income = 500.0 * ewmb::rng::u01(7, i, 2);
    out[i].x.group = static_cast<int>(ewmb::rng::u01(7, i, 3) * 3.0);
  }
  return out;
}

ewmb::PolicyGrid cube_grid() {
  std::vector<double> axis;
  for (int v = 0; v <= 500; v += 50) axis.push_back(v);
  return ewmb::enumerate_grid({{axis, axis, axis}, false});
}

void bm_moment_table(benchmark::State& state) {
  const auto scores = synthetic_scores(10000);
  const auto grid = cube_grid();
  for (auto _ : state)
    benchmark::DoNotOptimize(ewmb::moment_table(scores, grid));
}
BENCHMARK(bm_moment_table)->Unit(benchmark::kMillisecond);

void bm_moment_table_serial(benchmark::State& state) {
  const auto scores = synthetic_scores(10000);
  const auto grid = cube_grid();
  for (auto _ : state)
    benchmark::DoNotOptimize(ewmb::moment_table_serial(scores, grid));
}
BENCHMARK(bm_moment_table_serial)->Unit(benchmark::kMillisecond);

ewmb::CritValRequest critval_request() {
  const auto scores = synthetic_scores(10000);
  const auto grid = cube_grid();
  ewmb::CritValRequest req;
  req.cov_b = ewmb::moment_table(scores, grid).cov_b;
  req.n_draws = 2000;
  return req;
}

void bm_critical_value(benchmark::State& state) {
  const auto req = critval_request();
  for (auto _ : state)
    benchmark::DoNotOptimize(ewmb::critical_value(req));
}
BENCHMARK(bm_critical_value)->Unit(benchmark::kMillisecond);

void bm_critical_value_serial(benchmark::State& state) {
  const auto req = critval_request();
  for (auto _ : state)
    benchmark::DoNotOptimize(ewmb::critical_value_serial(req));
}
BENCHMARK(bm_critical_value_serial)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include <random>

#include "ergoshadow/experiments.hpp"
#include "ergoshadow/fiber_cycle.hpp"
#include "ergoshadow/gikn.hpp"
#include "ergoshadow/measure_metrics.hpp"
#include "ergoshadow/orbit_engine.hpp"
#include "ergoshadow/pliss.hpp"
#include "ergoshadow/quasi_shadow.hpp"

using namespace ergoshadow;

namespace {

void BM_PlissTimes(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PlissQuery<double> q;
  for (std::int64_t i = 0; i < state.range(0); ++i) q.a.push_back(u(rng));
  double s = 0.0;
  for (double x : q.a) s += x;
  q.b = 1.0;
  q.c = s / static_cast<double>(q.a.size());
  q.c_prime = q.c - 0.1;
  for (auto _ : state) benchmark::DoNotOptimize(pliss_times(q));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_PlissTimes)->RangeMultiplier(8)->Range(64, 1 << 18)->Complexity(benchmark::oN);

void BM_WeakStarDistance(benchmark::State& state) {
  const auto sys = default_torus_system();
  const auto a = empirical_measure(make_segment(sys, torus_point(0.1, 0.2, 0.3), state.range(0)));
  const auto b = empirical_measure(make_segment(sys, torus_point(0.4, 0.5, 0.6), state.range(0)));
  const auto family = TestFunctionFamily::torus();
  for (auto _ : state) benchmark::DoNotOptimize(weak_star_distance(family, a, b, 20));
}
BENCHMARK(BM_WeakStarDistance)->Arg(100)->Arg(10'000);

void BM_TorusBasePoints(benchmark::State& state) {
  const TorusBase base;
  for (auto _ : state) benchmark::DoNotOptimize(enumerate_base_periodic(base, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_TorusBasePoints)->DenseRange(4, 10, 2);

void BM_ShadowTorusPlan(benchmark::State& state) {
  const auto sys = default_torus_system();
  const auto o = periodic_orbits(sys, 3).front();
  std::vector<BundleLogRates> rates;
  for (std::int64_t i = 0; i < o.period(); ++i) rates.push_back(bundle_log_rates(sys, o.point(i)));
  const auto rot = quasi_hyperbolic_rotation(rates, std::exp(-0.5 * std::abs(o.lambda_c)),
                                             splitting_for_exponent(o.lambda_c))
                       .value_or(0);
  const auto plan = perturbed_periodic_plan(sys, o, rot, 1e-4, {0.3, -1.0, 0.5});
  for (auto _ : state) benchmark::DoNotOptimize(shadow_periodic(sys, plan, {100.0, 1e-2}));
}
BENCHMARK(BM_ShadowTorusPlan);

void BM_SymbolicAssembly(benchmark::State& state) {
  const auto sys = default_symbolic_system();
  const auto target = orbit_from_word(sys, "1", 0.0);
  const auto anchor = orbit_from_word(sys, "0", 0.0);
  for (auto _ : state) {
    const auto plan = assemble_pseudo_orbit(sys, AssemblyTarget::from_orbit(target), anchor, 0.5, 0.005);
    benchmark::DoNotOptimize(shadow_periodic(sys, plan));
  }
}
BENCHMARK(BM_SymbolicAssembly)->Unit(benchmark::kMillisecond);

void BM_GoodApproximationFastPath(benchmark::State& state) {
  const auto sys = default_symbolic_system();
  const auto g2 = orbit_from_word(sys, "00000111111", 0.0);
  std::string w;
  for (std::int64_t i = 0; i < state.range(0); ++i) w += "00000111111";
  w += "000111";
  const auto g1 = orbit_from_word(sys, w, 0.0);
  const GoodApproximationOptions fast{0};
  for (auto _ : state) benchmark::DoNotOptimize(check_good_approximation(sys, g1, g2, 1e-3, 0.5, fast));
}
BENCHMARK(BM_GoodApproximationFastPath)->Arg(100)->Arg(10'000)->Unit(benchmark::kMillisecond);

}  // namespace

namespace {

void BM_SolveFiberCycle(benchmark::State& state) {
  // (0^5 1^6)^k, contracting on average, started off the invariant level
  std::vector<CircleFiberMap> factors;
  const std::int64_t n = state.range(0);
  for (std::int64_t i = 0; i < n; ++i) factors.emplace_back(0.0, i % 11 < 5 ? -0.5 : 0.5);
  const std::vector<double> guess(static_cast<std::size_t>(n), 0.05);
  for (auto _ : state) benchmark::DoNotOptimize(solve_fiber_cycle(factors, guess));
}
BENCHMARK(BM_SolveFiberCycle)->RangeMultiplier(10)->Range(110, 1'100'000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

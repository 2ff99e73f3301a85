// Serial reference against the OpenMP surface kernels on a 20x20 grid.

#include <benchmark/benchmark.h>

#include "hetdeconv/grid.hpp"
#include "hetdeconv/simulation.hpp"

using namespace hetdeconv;

namespace {

struct Fixture {
    GeneratedData data;
    DeconvEstimator est;
    std::vector<double> xs;

    explicit Fixture(std::size_t n)
        : data([n] {
              Rng rng(20240);
              return generate(Model::Model1, n, build_ensemble(ErrorFamily::Laplace, n), rng);
          }()),
          est(fit(data.sample, {0.05, 0.065}, QuadratureGrid::gauss_legendre(64))),
          xs(GridAxis{-2.0, 2.0, 20}.points()) {}
};

void BM_reference_r_hat(benchmark::State& state) {
    const Fixture f(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(reference::r_hat_surface(f.est, f.xs, f.xs));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_openmp_r_hat(benchmark::State& state) {
    const Fixture f(static_cast<std::size_t>(state.range(0)));
    set_workers(static_cast<int>(state.range(1)));
    for (auto _ : state) benchmark::DoNotOptimize(r_hat_surface(f.est, f.xs, f.xs));
    state.SetItemsProcessed(state.iterations() * state.range(0));
    set_workers(0);
}

void BM_reference_naive(benchmark::State& state) {
    const Fixture f(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(reference::naive_surface(f.data.sample, {0.05, 0.065}, f.xs, f.xs));
}

void BM_openmp_naive(benchmark::State& state) {
    const Fixture f(static_cast<std::size_t>(state.range(0)));
    set_workers(static_cast<int>(state.range(1)));
    for (auto _ : state) benchmark::DoNotOptimize(naive_surface(f.data.sample, {0.05, 0.065}, f.xs, f.xs));
    set_workers(0);
}

}  // namespace

BENCHMARK(BM_reference_r_hat)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_openmp_r_hat)->ArgsProduct({{100, 500}, {1, 2, 4}})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_reference_naive)->Arg(100)->Arg(500)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_openmp_naive)->ArgsProduct({{100, 500}, {1, 2, 4}})->Unit(benchmark::kMicrosecond)->UseRealTime();

BENCHMARK_MAIN();

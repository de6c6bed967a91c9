#include "sapt/scapm.hpp"
#include "sapt/simulate.hpp"

#include <benchmark/benchmark.h>

using namespace sapt;

namespace {

Matrix gaussian(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j) {
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = z(rng);
    }
    return m;
}

Replication make_rep(int N, int T) {
    SimConfig c;
    c.N = N;
    c.T = T;
    return simulate_replication(c, weights_banded(N, c.q), 1234);
}

void silence() {
    set_warning_sink(+[](const std::string&) {});
}

}  // namespace

static void BM_RidgeSolve(benchmark::State& state) {
    const auto K = static_cast<Eigen::Index>(state.range(0));
    const Matrix X = gaussian(2 * K, K + 1, 1);
    const Vector Y = gaussian(2 * K, 1, 2).col(0);
    for (auto _ : state) benchmark::DoNotOptimize(ridge_solve(X, Y, 1e-3));
}
BENCHMARK(BM_RidgeSolve)->Arg(3)->Arg(10);

static void BM_BuildM(benchmark::State& state) {
    silence();
    const Replication r = make_rep(static_cast<int>(state.range(0)), 400);
    const PanelData y = demean(PanelData(r.y));
    for (auto _ : state) benchmark::DoNotOptimize(build_M(y, 2));
}
BENCHMARK(BM_BuildM)->Arg(25)->Arg(100)->Unit(benchmark::kMillisecond);

static void BM_EstimateObserved(benchmark::State& state) {
    silence();
    const Replication r = make_rep(25, static_cast<int>(state.range(0)));
    const PanelData y = demean(PanelData(r.y));
    const FactorSet f = demean(FactorSet(r.factors));
    const SpatialWeights w = weights_banded(25, 3);
    for (auto _ : state) benchmark::DoNotOptimize(estimate_observed(y, f, w, 1e-3, LagSpec::fixed(1)));
}
BENCHMARK(BM_EstimateObserved)->Arg(400)->Arg(1600)->Unit(benchmark::kMillisecond);

static void BM_MonteCarloRep(benchmark::State& state) {
    silence();
    SimConfig c;
    c.reps = 1;
    const Task task = static_cast<Task>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(run_monte_carlo(c, task));
    state.SetLabel(to_string(task));
}
BENCHMARK(BM_MonteCarloRep)
    ->Arg(static_cast<int>(Task::Observed))
    ->Arg(static_cast<int>(Task::Forecast))
    ->Arg(static_cast<int>(Task::Latent))
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

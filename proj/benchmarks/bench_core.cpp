#include <benchmark/benchmark.h>

#include <vector>

#include "pbound/combinatorics.hpp"
#include "pbound/integrator_synthesis.hpp"
#include "pbound/io.hpp"
#include "pbound/presets.hpp"
#include "pbound/saturation.hpp"
#include "pbound/simulation.hpp"
#include "pbound/skew_synthesis.hpp"

using namespace pbound;

namespace {

const NestedSatController& triple() {
    static const NestedSatController c = std::get<NestedSatController>(synthesize_from_config(triple_integrator_config()));
    return c;
}

const SkewController& oscillator() {
    static const SkewController c = [] {
        const ToolkitConfig cfg = harmonic_oscillator_config();
        return make_skew_controller(*cfg.system, *cfg.beta);
    }();
    return c;
}

void BM_BellPolynomial(benchmark::State& state) {
    const int k = static_cast<int>(state.range(0));
    const int a = k / 2;
    std::vector<double> args(static_cast<std::size_t>(k - a + 1), 1.1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(bell_polynomial(k, a, args));
    }
}
BENCHMARK(BM_BellPolynomial)->Arg(4)->Arg(8)->Arg(12);

void BM_FaaDiBruno(benchmark::State& state) {
    const int k = static_cast<int>(state.range(0));
    std::vector<double> outer(static_cast<std::size_t>(k), 0.7);
    std::vector<double> inner(static_cast<std::size_t>(k), 1.3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(faa_di_bruno(k, outer, inner));
    }
}
BENCHMARK(BM_FaaDiBruno)->Arg(2)->Arg(4)->Arg(6);

void BM_SaturationEval(benchmark::State& state) {
    const Saturation s = make_hermite_saturation(3, 2.0, 1.0, 1.0);
    double r = 0.0;
    for (auto _ : state) {
        r += 1e-3;
        if (r > 3.0) {
            r = -3.0;
        }
        benchmark::DoNotOptimize(s.eval(r, 2));
    }
}
BENCHMARK(BM_SaturationEval);

void BM_NestedFeedback(benchmark::State& state) {
    const std::vector<double> x{3.0, -1.0, 0.5};
    for (auto _ : state) {
        benchmark::DoNotOptimize(triple().feedback(x));
    }
}
BENCHMARK(BM_NestedFeedback);

void BM_ChainDerivatives(benchmark::State& state) {
    const std::vector<double> x{3.0, -1.0, 0.5};
    for (auto _ : state) {
        benchmark::DoNotOptimize(chain_u_derivatives(triple(), x, 2));
    }
}
BENCHMARK(BM_ChainDerivatives);

void BM_SkewDerivatives(benchmark::State& state) {
    const std::vector<double> x{2.0, -2.0};
    const SkewController& c = oscillator();
    for (auto _ : state) {
        benchmark::DoNotOptimize(skew_u_derivatives(c.system, c.beta, x, 1));
    }
}
BENCHMARK(BM_SkewDerivatives);

void BM_ChainSimulation(benchmark::State& state) {
    const std::vector<double> x0{446.7937, -69.875, 11.05};
    SimulationOptions o;
    o.t_max = 10.0;
    o.stop_norm = 0.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(simulate_chain(triple(), x0, o));
    }
    state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_ChainSimulation)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

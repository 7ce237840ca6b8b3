#include "cbo/dynamics.hpp"
#include "cbo/objective.hpp"

#include <benchmark/benchmark.h>

using namespace cbo;

namespace {

void BM_ConsensusPoint(benchmark::State& state) {
    const auto n = static_cast<Index>(state.range(0));
    const Index d = 50;
    const Objective obj = make_rastrigin(d);
    const Ensemble ens = init_ensemble(n, d, InitSpec::gaussian(d, 0.0, 2.0), obj, RngStream(1));
    for (auto _ : state) {
        benchmark::DoNotOptimize(consensus_point(ens.memories, ens.memory_energies, 100.0));
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_ConsensusPoint)->Arg(10)->Arg(100)->Arg(1000);

void BM_StepRastrigin(benchmark::State& state) {
    const auto n = static_cast<Index>(state.range(0));
    const Objective obj = make_rastrigin(4);
    Ensemble ens = init_ensemble(n, 4, InitSpec::gaussian(4, 2.0, 2.0), obj, RngStream(2));
    CboParams p;
    p.sigma1 = 1.2649110640673518;
    p.lambda2 = 1.0;
    const RngStream rng(2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(advance(ens, p, obj, rng));
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_StepRastrigin)->Arg(100)->Arg(1000);

void BM_StepCompressedSensing(benchmark::State& state) {
    const auto n = static_cast<Index>(state.range(0));
    auto inst = std::make_shared<const CsInstance>(generate_cs_instance(50, 25, 2, 0.01, 1.0, RngStream(3)));
    const Objective obj = make_cs_objective(inst);
    Ensemble ens = init_ensemble(n, 50, InitSpec::gaussian(50, 0.0, 0.1), obj, RngStream(3));
    CboParams p;
    p.lambda3 = 1.0;
    const RngStream rng(3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(advance(ens, p, obj, rng));
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_StepCompressedSensing)->Arg(10)->Arg(100);

}  // namespace
BENCHMARK_MAIN();

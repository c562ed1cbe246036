#include "socfrac/avalanche_stats.hpp"
#include "socfrac/beam.hpp"
#include "socfrac/damage.hpp"
#include "socfrac/lattice.hpp"
#include "socfrac/scenario.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

using namespace socfrac;

namespace {

std::vector<damage::TrussState> damaged_states(const lattice::LatticeGrid& grid, double e0) {
    damage::SeededRng rng(5);
    auto states = damage::make_intact_states(static_cast<std::size_t>(grid.truss_count()), e0, rng);
    for (std::size_t i = 0; i < states.size(); i += 7) states[i] = damage::apply_damage(states[i], rng);
    return states;
}

void BM_AssembleStiffness(benchmark::State& st) {
    const int n = static_cast<int>(st.range(0));
    const lattice::LatticeGrid grid(n, n, 1.0);
    const lattice::MaterialParams mat;
    const auto states = damaged_states(grid, mat.e0);
    for (auto _ : st) benchmark::DoNotOptimize(lattice::assemble_stiffness(grid, states, mat.area));
    st.SetComplexityN(grid.truss_count());
}
BENCHMARK(BM_AssembleStiffness)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMicrosecond);

void BM_AssembleGlobal(benchmark::State& st) {
    const int n = static_cast<int>(st.range(0));
    const lattice::LatticeGrid grid(n, n, 1.0);
    const lattice::MaterialParams mat;
    const auto states = damaged_states(grid, mat.e0);
    for (auto _ : st) benchmark::DoNotOptimize(lattice::assemble_global(grid, states, mat));
}
BENCHMARK(BM_AssembleGlobal)->Arg(16)->Unit(benchmark::kMillisecond);

// Quasi-static stations on an undamaged lattice, reported per station.
void BM_QuasiStaticStations(benchmark::State& st) {
    scenario::ScenarioConfig c;
    c.nx = c.ny = static_cast<int>(st.range(0));
    c.steps = 20;
    c.damage = false;
    for (auto _ : st) benchmark::DoNotOptimize(scenario::run_scenario(c));
    st.SetItemsProcessed(st.iterations() * c.steps);
}
BENCHMARK(BM_QuasiStaticStations)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_DamagedFluxRamp(benchmark::State& st) {
    scenario::ScenarioConfig c;
    c.drive = scenario::DriveType::flux_ramp;
    c.drive_value = 1e-3;
    c.steps = 20;
    for (auto _ : st) benchmark::DoNotOptimize(scenario::run_scenario(c));
    st.SetItemsProcessed(st.iterations() * c.steps);
}
BENCHMARK(BM_DamagedFluxRamp)->Unit(benchmark::kMillisecond);

std::vector<int> power_law_sample(std::size_t n) {
    const stats::PowerLawSampler sample(2.0, 1);
    std::mt19937_64 g(3);
    std::uniform_real_distribution<double> u(1e-300, 1.0);
    std::vector<int> out(n);
    for (int& s : out) s = sample(u(g));
    return out;
}

void BM_FitPowerLaw(benchmark::State& st) {
    const auto data = power_law_sample(10000);
    stats::FitOptions opt;
    opt.bootstrap = static_cast<std::size_t>(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(stats::fit_power_law(data, opt));
}
BENCHMARK(BM_FitPowerLaw)->Arg(0)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_BeamStep(benchmark::State& st) {
    beam::BeamConfig c;
    c.nodes = static_cast<int>(st.range(0));
    beam::BeamIntegrator it(c);
    auto s = beam::initial_state(c);
    for (auto _ : st) it.step(s);
    st.SetItemsProcessed(st.iterations());
}
BENCHMARK(BM_BeamStep)->Arg(201)->Arg(801)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();

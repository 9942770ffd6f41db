#include <benchmark/benchmark.h>

#include <filesystem>

#include "carbamm/allocation/allocation.hpp"
#include "carbamm/equilibrium/engine.hpp"
#include "carbamm/models/chain.hpp"
#include "carbamm/models/cone.hpp"

using namespace carbamm;

namespace {

scenario::Scenario tiny() {
  return scenario::load_scenario(std::filesystem::path(CARBAMM_TEST_DATA) / "tiny.scenario.json");
}

void BM_ConeLp(benchmark::State& state) {
  const int depth = static_cast<int>(state.range(0));
  for (auto _ : state) {
    ir::ProgramBuilder b("cone");
    const int x = b.add_block("x", 1, 0.6, 0.6);
    const int pn = b.add_block("pn", 1, 0.8, 0.8);
    const int pm = b.add_block("pm", 1, 0.0, ir::kInf);
    models::add_polyhedral_cone(b, {x, 1.0, pm, pn}, depth, "c");
    b.add_cost(pm, 1.0);
    benchmark::DoNotOptimize(ir::solve(b.build()).solution.objective);
  }
}
BENCHMARK(BM_ConeLp)->Arg(2)->Arg(6)->Arg(12);

void BM_BuildChainWeek(benchmark::State& state) {
  const auto sc = scenario::default_scenario();
  models::ChainOptions opt;
  opt.ammonia_value = {2500.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(models::build_chain(sc.chain, models::Horizon::week(sc.grid, 0), opt).num_rows());
  }
}
BENCHMARK(BM_BuildChainWeek)->Unit(benchmark::kMillisecond);

void BM_SolveChainWeek(benchmark::State& state) {
  const auto sc = scenario::default_scenario();
  for (auto _ : state) {
    benchmark::DoNotOptimize(equilibrium::solve_weekly_sp(sc, 0, 2500.0).yield_t);
  }
}
BENCHMARK(BM_SolveChainWeek)->Unit(benchmark::kMillisecond)->Iterations(3);

void BM_OuterDuopoly(benchmark::State& state) {
  equilibrium::OuterProblem p;
  p.ga.resize(static_cast<std::size_t>(state.range(0)));
  for (std::size_t g = 0; g < p.ga.size(); ++g) p.ga[g].name = "GA" + std::to_string(g);
  p.carbon = {ir::kInf, 0.0, market::Mechanism::kM1, std::nullopt};
  for (auto _ : state) benchmark::DoNotOptimize(equilibrium::solve_outer(p).carbon_price);
}
BENCHMARK(BM_OuterDuopoly)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_TinyPipeline(benchmark::State& state) {
  const auto sc = tiny();
  for (auto _ : state) benchmark::DoNotOptimize(equilibrium::solve_equilibrium(sc).outer.carbon_price);
}
BENCHMARK(BM_TinyPipeline)->Unit(benchmark::kMillisecond);

void BM_Pcam(benchmark::State& state) {
  allocation::AllocationInput in;
  in.carbon_price = 100.0;
  in.q_all_t = 46000.0;
  in.baseline = {2.67e7, 1.81e7, 0.11e7};
  in.revenue = {2.53e7, 1.73e7, 0.23e7};
  for (auto _ : state) benchmark::DoNotOptimize(allocation::allocate_pcam(in).delta_sum);
}
BENCHMARK(BM_Pcam);

}  // namespace
BENCHMARK_MAIN();

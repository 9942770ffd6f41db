#include <iostream>

#include <CLI11.hpp>

#include "carbamm/allocation/allocation.hpp"
#include "carbamm/equilibrium/engine.hpp"
#include "commands.hpp"

using namespace carbamm;

namespace {

void add_common(CLI::App* sub, cli::CommonArgs& c) {
  sub->add_option("--scenario", c.scenario, "scenario JSON (default: built-in nine-bus scenario)");
  sub->add_option("--out", c.out, "output directory")->capture_default_str();
  sub->add_option("--seed", c.seed, "seed for the synthetic profile and the solver");
  sub->add_option("--jobs", c.jobs, "worker threads for the weekly programs")->check(CLI::PositiveNumber);
}

template <class F>
int guarded(F&& run) {
  try {
    return run();
  } catch (const cli::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kUsage;
  } catch (const scenario::ScenarioError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kUsage;
  } catch (const equilibrium::EquilibriumError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == equilibrium::EquilibriumError::Kind::kInfeasible ? cli::kInfeasible : cli::kCertification;
  } catch (const ir::SolveError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kInfeasible;
  } catch (const ir::ModelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kUsage;
  } catch (const allocation::AllocationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kCertification;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Carbon-allowance trading equilibria for renewable power-to-ammonia chains"};
  app.require_subcommand(1);
  app.set_version_flag("--version", CARBAMM_VERSION);

  cli::CommonArgs common;
  for (int i = 1; i < argc; ++i) common.argv.emplace_back(argv[i]);

  cli::SolveArgs solve;
  auto* s = app.add_subcommand("solve", "solve one scenario under a carbon mechanism");
  add_common(s, common);
  s->add_option("--mechanism", solve.mechanism, "m1, m2, m3 or pcim")
      ->check(CLI::IsMember({"m1", "m2", "m3", "pcim"}));
  s->add_option("--fixed-price", solve.fixed_price, "carbon price for m3, CNY/t");
  s->add_flag("!--no-verify", solve.verify, "skip the unilateral-deviation check");

  cli::SweepArgs sweep;
  auto* w = app.add_subcommand("sweep", "one equilibrium per grid point of a parameter");
  add_common(w, common);
  w->add_option("--param", sweep.param, "fixed-carbon-price, carbon-cap, ra-capacity-mult or ga-count")->required();
  w->add_option("--range", sweep.range, "A:B:STEP")->required();

  cli::AllocateArgs alloc;
  auto* a = app.add_subcommand("allocate", "split allowance revenue between RG, HP and RA");
  add_common(a, common);
  a->add_option("--cam", alloc.cam, "pcam, cam1:rg|hp|ra or cam2")->capture_default_str();

  cli::PerturbArgs perturb;
  auto* p = app.add_subcommand("perturb-ir", "re-solve with the traded volume pinned");
  add_common(p, common);
  p->add_option("--volumes", perturb.volumes, "comma list or A:B:STEP, t")->required();
  p->add_flag("--kt", perturb.kilotonnes, "volumes are given in 1e3 t");

  cli::CommonArgs shown;
  auto* show = app.add_subcommand("print-scenario", "print a scenario as normalized JSON");
  show->add_option("--scenario", shown.scenario, "scenario JSON (default: built-in nine-bus scenario)");
  show->add_option("--seed", shown.seed, "seed for the synthetic profile");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kUsage;
  }

  if (show->parsed()) {
    return guarded([&] {
      std::cout << scenario::to_json(cli::load(shown).scenario) << "\n";
      return 0;
    });
  }
  if (s->parsed()) return guarded([&] { return cli::run_solve(common, solve); });
  if (w->parsed()) return guarded([&] { return cli::run_sweep(common, sweep); });
  if (a->parsed()) return guarded([&] { return cli::run_allocate(common, alloc); });
  return guarded([&] { return cli::run_perturb(common, perturb); });
}

#pragma once

#include <string>
#include <string_view>

#include "carbamm/ir/complementarity.hpp"
#include "carbamm/ir/program.hpp"
#include "carbamm/ir/solution.hpp"

namespace carbamm::ir {

struct SolveOptions {
  double feasibility_tol = 1e-7;
  double optimality_tol = 1e-7;
  double complementarity_tol = 1e-6;
  double mip_rel_gap = 1e-6;
  double time_limit = 3600.0;
  int random_seed = 0;
  bool compute_residuals = true;
  bool verbose = false;
  std::string backend = "highs";
  // LP algorithm: "simplex" or "ipm" (interior point with crossover).
  std::string lp_method = "simplex";
};

class SolveError : public std::runtime_error {
 public:
  SolveError(SolveStatus status, const std::string& what)
      : std::runtime_error(what), status_(status) {}
  SolveStatus status() const { return status_; }

 private:
  SolveStatus status_;
};

// Backends compiled into this build.
std::vector<std::string> available_backends();
bool backend_available(std::string_view name);

// LP or convex QP. The program must be instantiated (no open parameters).
SolveResult solve(const ConvexProgram& program, const SolveOptions& options = {});

// Branch-and-bound; returns primal values only.
SolveResult solve(const MixedIntegerProgram& mip, const SolveOptions& options = {});

// Re-solves the MIP model as an LP with the integers fixed at the rounded
// values of `x`, which recovers duals for that assignment.
SolveResult solve_fixed(const MixedIntegerProgram& mip, std::span<const double> x,
                        const SolveOptions& options = {});

// Throws SolveError unless the result is optimal.
const Solution& require_optimal(const SolveResult& result, std::string_view context);

}  // namespace carbamm::ir

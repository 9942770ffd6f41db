#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "carbamm/ir/program.hpp"

namespace carbamm::ir {

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kNumericFailure, kLimitReached };

std::string to_string(SolveStatus status);

// Row duals follow the sign conventions of the standard form: equality
// duals are free, ">=" and coupling duals are nonnegative. Bound duals are
// split into nonnegative lower and upper parts.
struct Solution {
  SolveStatus status = SolveStatus::kNumericFailure;
  std::vector<double> x;
  std::vector<double> row_dual;
  std::vector<double> lower_dual;
  std::vector<double> upper_dual;
  double objective = 0.0;

  bool optimal() const { return status == SolveStatus::kOptimal; }
  bool has_duals() const { return !row_dual.empty(); }
};

struct KktResiduals {
  double stationarity = 0.0;
  double primal_equality = 0.0;
  double primal_inequality = 0.0;
  double complementarity = 0.0;
  double dual_sign = 0.0;

  double max() const;
};

struct SolveReport {
  SolveStatus status = SolveStatus::kNumericFailure;
  double objective = 0.0;
  std::optional<KktResiduals> residuals;
  double seconds = 0.0;
  long iterations = 0;
  double mip_gap = 0.0;
  long nodes = 0;
  std::string backend;
  std::string message;
};

struct SolveResult {
  Solution solution;
  SolveReport report;
};

// Max-norm KKT residuals of a solution to an instantiated program. Each
// entry is normalized by max(1, magnitude of the terms that enter it).
KktResiduals kkt_residuals(const ConvexProgram& program, const Solution& solution);

// Largest absolute violation of rows and bounds.
double max_violation(const ConvexProgram& program, std::span<const double> x);

}  // namespace carbamm::ir

#include <Highs.h>

#include <algorithm>
#include <chrono>
#include <cmath>

#include "carbamm/ir/solver.hpp"

namespace carbamm::ir {

namespace {

constexpr std::string_view kBackend = "highs";

double to_highs(double v) {
  if (v == kInf) return kHighsInf;
  if (v == -kInf) return -kHighsInf;
  return v;
}

HighsModel to_model(const ConvexProgram& p, const std::vector<int>* integers) {
  if (!p.params().empty()) {
    throw ModelError("program '" + p.name() + "' has unbound parameters");
  }
  HighsModel model;
  HighsLp& lp = model.lp_;
  const int n = p.num_cols();
  const int m = p.num_rows();
  lp.num_col_ = n;
  lp.num_row_ = m;
  lp.sense_ = ObjSense::kMinimize;
  lp.offset_ = p.cost_constant();
  lp.col_cost_.assign(p.cost().begin(), p.cost().end());
  lp.col_lower_.resize(n);
  lp.col_upper_.resize(n);
  for (int j = 0; j < n; ++j) {
    lp.col_lower_[j] = to_highs(p.lower()[j]);
    lp.col_upper_[j] = to_highs(p.upper()[j]);
  }
  lp.row_lower_.resize(m);
  lp.row_upper_.resize(m);
  auto& a = lp.a_matrix_;
  a.format_ = MatrixFormat::kRowwise;
  a.num_col_ = n;
  a.num_row_ = m;
  a.start_.assign(1, 0);
  for (int r = 0; r < m; ++r) {
    switch (p.kind(r)) {
      case RowKind::kEqual:
        lp.row_lower_[r] = lp.row_upper_[r] = p.rhs(r);
        break;
      case RowKind::kGreaterEqual:
        lp.row_lower_[r] = p.rhs(r);
        lp.row_upper_[r] = kHighsInf;
        break;
      case RowKind::kCoupling:
        lp.row_lower_[r] = -kHighsInf;
        lp.row_upper_[r] = p.rhs(r);
        break;
    }
    for (const auto& t : p.row(r)) {
      a.index_.push_back(t.col);
      a.value_.push_back(t.coef);
    }
    a.start_.push_back(static_cast<HighsInt>(a.index_.size()));
  }
  if (integers != nullptr && !integers->empty()) {
    lp.integrality_.assign(n, HighsVarType::kContinuous);
    for (int c : *integers) lp.integrality_[c] = HighsVarType::kInteger;
  }
  if (!p.is_linear()) {
    // HiGHS minimizes c'x + x'Hx/2 with H in lower-triangular CSC form.
    std::vector<std::vector<std::pair<int, double>>> cols(n);
    for (const auto& q : p.quadratic()) cols[q.row].push_back({q.col, 2.0 * q.value});
    auto& h = model.hessian_;
    h.dim_ = n;
    h.format_ = HessianFormat::kTriangular;
    h.start_.assign(1, 0);
    for (int j = 0; j < n; ++j) {
      std::sort(cols[j].begin(), cols[j].end());
      for (const auto& [i, v] : cols[j]) {
        h.index_.push_back(i);
        h.value_.push_back(v);
      }
      h.start_.push_back(static_cast<HighsInt>(h.index_.size()));
    }
  }
  return model;
}

void configure(Highs& highs, const SolveOptions& o, bool mip, bool qp) {
  highs.setOptionValue("output_flag", o.verbose);
  highs.setOptionValue("primal_feasibility_tolerance", o.feasibility_tol);
  highs.setOptionValue("dual_feasibility_tolerance", o.optimality_tol);
  highs.setOptionValue("random_seed", o.random_seed);
  highs.setOptionValue("time_limit", o.time_limit);
  if (mip) {
    highs.setOptionValue("mip_rel_gap", o.mip_rel_gap);
    highs.setOptionValue("mip_feasibility_tolerance", o.feasibility_tol);
  } else if (!qp) {
    // The simplex and ipm choices would drop the Hessian of a QP.
    highs.setOptionValue("solver", o.lp_method);
  }
}

SolveStatus map_status(HighsModelStatus s) {
  switch (s) {
    case HighsModelStatus::kOptimal: return SolveStatus::kOptimal;
    case HighsModelStatus::kInfeasible: return SolveStatus::kInfeasible;
    case HighsModelStatus::kUnbounded:
    case HighsModelStatus::kUnboundedOrInfeasible: return SolveStatus::kUnbounded;
    case HighsModelStatus::kTimeLimit:
    case HighsModelStatus::kIterationLimit:
    case HighsModelStatus::kSolutionLimit:
    case HighsModelStatus::kObjectiveBound:
    case HighsModelStatus::kObjectiveTarget: return SolveStatus::kLimitReached;
    default: return SolveStatus::kNumericFailure;
  }
}

SolveResult run(const ConvexProgram& p, const std::vector<int>* integers, const SolveOptions& o) {
  if (o.backend != kBackend) throw ModelError("solver backend '" + o.backend + "' is not available");
  const auto start = std::chrono::steady_clock::now();
  const bool mip = integers != nullptr && !integers->empty();
  Highs highs;
  configure(highs, o, mip, !p.is_linear());
  if (highs.passModel(to_model(p, integers)) == HighsStatus::kError) {
    throw ModelError("solver rejected program '" + p.name() + "'");
  }
  highs.run();
  HighsModelStatus hs = highs.getModelStatus();
  if (hs == HighsModelStatus::kUnboundedOrInfeasible) {
    // Presolve could not tell the two apart; ask again without it.
    highs.setOptionValue("presolve", "off");
    highs.run();
    hs = highs.getModelStatus();
  }

  SolveResult out;
  auto& sol = out.solution;
  auto& rep = out.report;
  sol.status = map_status(hs);
  rep.status = sol.status;
  rep.backend = std::string(kBackend);
  rep.message = highs.modelStatusToString(hs);
  const auto& info = highs.getInfo();
  rep.iterations = static_cast<long>(std::max<HighsInt>(0, info.simplex_iteration_count) +
                                     std::max<HighsInt>(0, info.qp_iteration_count) +
                                     std::max<HighsInt>(0, info.ipm_iteration_count));
  if (mip) {
    rep.nodes = static_cast<long>(info.mip_node_count);
    rep.mip_gap = info.mip_gap;
  }
  if (sol.status == SolveStatus::kOptimal) {
    const auto& hsol = highs.getSolution();
    sol.x = hsol.col_value;
    sol.objective = info.objective_function_value;
    if (!mip && hsol.dual_valid) {
      sol.row_dual.resize(p.num_rows());
      for (int r = 0; r < p.num_rows(); ++r) {
        const double y = hsol.row_dual[r];
        sol.row_dual[r] = p.kind(r) == RowKind::kCoupling ? -y : y;
      }
      sol.lower_dual.resize(p.num_cols());
      sol.upper_dual.resize(p.num_cols());
      for (int j = 0; j < p.num_cols(); ++j) {
        const double z = hsol.col_dual[j];
        sol.lower_dual[j] = std::max(z, 0.0);
        sol.upper_dual[j] = std::max(-z, 0.0);
      }
    }
  }
  rep.objective = sol.objective;
  if (o.compute_residuals && sol.optimal() && sol.has_duals()) {
    rep.residuals = kkt_residuals(p, sol);
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace

std::vector<std::string> available_backends() { return {std::string(kBackend)}; }

bool backend_available(std::string_view name) { return name == kBackend; }

SolveResult solve(const ConvexProgram& program, const SolveOptions& options) {
  return run(program, nullptr, options);
}

SolveResult solve(const MixedIntegerProgram& mip, const SolveOptions& options) {
  return run(mip.model, &mip.integers, options);
}

SolveResult solve_fixed(const MixedIntegerProgram& mip, std::span<const double> x,
                        const SolveOptions& options) {
  return run(fix_integers(mip, x), nullptr, options);
}

const Solution& require_optimal(const SolveResult& result, std::string_view context) {
  if (!result.solution.optimal()) {
    throw SolveError(result.solution.status,
                     std::string(context) + ": solver returned " + to_string(result.solution.status));
  }
  return result.solution;
}

}  // namespace carbamm::ir

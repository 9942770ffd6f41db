#include "carbamm/ir/solution.hpp"

#include <algorithm>
#include <cmath>

namespace carbamm::ir {

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kUnbounded: return "unbounded";
    case SolveStatus::kNumericFailure: return "numeric-failure";
    case SolveStatus::kLimitReached: return "limit-reached";
  }
  return "unknown";
}

double KktResiduals::max() const {
  return std::max({stationarity, primal_equality, primal_inequality, complementarity, dual_sign});
}

namespace {

double row_scale(const ConvexProgram& p, int r, std::span<const double> x) {
  double s = std::max(1.0, std::abs(p.rhs(r)));
  for (const auto& t : p.row(r)) s = std::max(s, std::abs(t.coef * x[t.col]));
  return s;
}

}  // namespace

KktResiduals kkt_residuals(const ConvexProgram& p, const Solution& s) {
  const int n = p.num_cols();
  const int m = p.num_rows();
  if (static_cast<int>(s.x.size()) != n || static_cast<int>(s.row_dual.size()) != m ||
      static_cast<int>(s.lower_dual.size()) != n || static_cast<int>(s.upper_dual.size()) != n) {
    throw ModelError("dimension mismatch between program and solution");
  }
  if (!p.params().empty()) throw ModelError("kkt_residuals needs an instantiated program");

  KktResiduals out;
  const auto qx = p.quad_times(s.x);
  std::vector<double> grad(n), scale(n, 1.0);
  for (int j = 0; j < n; ++j) {
    grad[j] = p.cost()[j] + 2.0 * qx[j] - s.lower_dual[j] + s.upper_dual[j];
    scale[j] = std::max({1.0, std::abs(p.cost()[j]), std::abs(2.0 * qx[j]),
                         std::abs(s.lower_dual[j]), std::abs(s.upper_dual[j])});
  }
  for (int r = 0; r < m; ++r) {
    const double y = s.row_dual[r];
    const double sign = p.kind(r) == RowKind::kCoupling ? 1.0 : -1.0;
    for (const auto& t : p.row(r)) {
      grad[t.col] += sign * t.coef * y;
      scale[t.col] = std::max(scale[t.col], std::abs(t.coef * y));
    }
    const double act = p.row_activity(r, s.x);
    const double rs = row_scale(p, r, s.x);
    switch (p.kind(r)) {
      case RowKind::kEqual:
        out.primal_equality = std::max(out.primal_equality, std::abs(act - p.rhs(r)) / rs);
        break;
      case RowKind::kGreaterEqual: {
        const double slack = act - p.rhs(r);
        out.primal_inequality = std::max(out.primal_inequality, std::max(0.0, -slack) / rs);
        out.complementarity =
            std::max(out.complementarity, std::min(std::abs(slack) / rs, std::abs(y)));
        out.dual_sign = std::max(out.dual_sign, std::max(0.0, -y));
        break;
      }
      case RowKind::kCoupling: {
        const double slack = p.rhs(r) - act;
        out.primal_inequality = std::max(out.primal_inequality, std::max(0.0, -slack) / rs);
        out.complementarity =
            std::max(out.complementarity, std::min(std::abs(slack) / rs, std::abs(y)));
        out.dual_sign = std::max(out.dual_sign, std::max(0.0, -y));
        break;
      }
    }
  }
  for (int j = 0; j < n; ++j) {
    out.stationarity = std::max(out.stationarity, std::abs(grad[j]) / scale[j]);
    const double lo = p.lower()[j];
    const double hi = p.upper()[j];
    const double zl = s.lower_dual[j];
    const double zu = s.upper_dual[j];
    const double xs = std::max(1.0, std::abs(s.x[j]));
    if (std::isfinite(lo)) {
      out.primal_inequality = std::max(out.primal_inequality, std::max(0.0, lo - s.x[j]) / xs);
      out.complementarity = std::max(out.complementarity, std::min(std::abs(s.x[j] - lo) / xs, std::abs(zl)));
      out.dual_sign = std::max(out.dual_sign, std::max(0.0, -zl));
    } else {
      out.dual_sign = std::max(out.dual_sign, std::abs(zl));
    }
    if (std::isfinite(hi)) {
      out.primal_inequality = std::max(out.primal_inequality, std::max(0.0, s.x[j] - hi) / xs);
      out.complementarity = std::max(out.complementarity, std::min(std::abs(hi - s.x[j]) / xs, std::abs(zu)));
      out.dual_sign = std::max(out.dual_sign, std::max(0.0, -zu));
    } else {
      out.dual_sign = std::max(out.dual_sign, std::abs(zu));
    }
  }
  return out;
}

double max_violation(const ConvexProgram& p, std::span<const double> x) {
  if (static_cast<int>(x.size()) != p.num_cols()) throw ModelError("dimension mismatch in max_violation");
  double v = 0.0;
  for (int j = 0; j < p.num_cols(); ++j) {
    v = std::max({v, p.lower()[j] - x[j], x[j] - p.upper()[j]});
  }
  for (int r = 0; r < p.num_rows(); ++r) {
    const double act = p.row_activity(r, x);
    switch (p.kind(r)) {
      case RowKind::kEqual: v = std::max(v, std::abs(act - p.rhs(r))); break;
      case RowKind::kGreaterEqual: v = std::max(v, p.rhs(r) - act); break;
      case RowKind::kCoupling: v = std::max(v, act - p.rhs(r)); break;
    }
  }
  return std::max(v, 0.0);
}

}  // namespace carbamm::ir

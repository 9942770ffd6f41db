#include "carbamm/ir/complementarity.hpp"

#include <cmath>

namespace carbamm::ir {

double AffineExpr::eval(std::span<const double> x) const {
  double v = constant;
  for (const auto& t : terms) v += t.coef * x[t.col];
  return v;
}

AffineExpr row_slack(const ConvexProgram& p, int r) {
  if (r < 0 || r >= p.num_rows()) throw ModelError("pair references unknown row " + std::to_string(r));
  AffineExpr e;
  const auto row = p.row(r);
  switch (p.kind(r)) {
    case RowKind::kGreaterEqual:
      e.terms.assign(row.begin(), row.end());
      e.constant = -p.rhs(r);
      break;
    case RowKind::kCoupling:
      for (const auto& t : row) e.terms.push_back({t.col, -t.coef});
      e.constant = p.rhs(r);
      break;
    case RowKind::kEqual:
      throw ModelError("equality row '" + p.row_label(r) + "' has no complementarity slack");
  }
  return e;
}

double box_upper_bound(const ConvexProgram& p, const AffineExpr& e) {
  double v = e.constant;
  for (const auto& t : e.terms) {
    v += t.coef > 0 ? t.coef * p.upper()[t.col] : t.coef * p.lower()[t.col];
  }
  return std::isnan(v) ? kInf : v;
}

MixedIntegerProgram encode_complementarity(std::vector<ComplementarityPair> pairs,
                                           const ConvexProgram& program) {
  ProgramBuilder b(program);
  MixedIntegerProgram out;
  const int first = b.num_cols();
  for (const auto& pair : pairs) {
    if (!(std::isfinite(pair.slack_big_m) && pair.slack_big_m > 0 &&
          std::isfinite(pair.multiplier_big_m) && pair.multiplier_big_m > 0)) {
      throw ModelError("infinite or nonpositive big-M requested for pair '" + pair.label + "'");
    }
    if (pair.multiplier < 0 || pair.multiplier >= program.num_cols()) {
      throw ModelError("pair '" + pair.label + "' references unknown multiplier");
    }
    for (const auto& t : pair.slack.terms) {
      if (t.col < 0 || t.col >= program.num_cols()) {
        throw ModelError("pair '" + pair.label + "' references unknown column");
      }
    }
  }
  if (!pairs.empty()) b.add_block("cmp_z", static_cast<int>(pairs.size()), 0.0, 1.0, "binary");
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    auto& pair = pairs[k];
    pair.binary = first + static_cast<int>(k);
    // slack + M_s z <= M_s
    std::vector<Term> row = pair.slack.terms;
    row.push_back({pair.binary, pair.slack_big_m});
    b.add_le(std::move(row), pair.slack_big_m - pair.slack.constant, "cmp_s:" + pair.label);
    // M_m z - mult >= 0
    b.add_ge({{pair.binary, pair.multiplier_big_m}, {pair.multiplier, -1.0}}, 0.0,
             "cmp_m:" + pair.label);
    out.integers.push_back(pair.binary);
  }
  out.model = b.build();
  out.pairs = std::move(pairs);
  return out;
}

std::vector<BigMFlag> validate_big_m(const MixedIntegerProgram& mip, std::span<const double> x,
                                     double threshold) {
  std::vector<BigMFlag> flags;
  for (const auto& pair : mip.pairs) {
    const double s = pair.slack.eval(x);
    const double m = x[pair.multiplier];
    if (s >= threshold * pair.slack_big_m) flags.push_back({pair.label, true, s, pair.slack_big_m});
    if (m >= threshold * pair.multiplier_big_m) {
      flags.push_back({pair.label, false, m, pair.multiplier_big_m});
    }
  }
  return flags;
}

ConvexProgram fix_integers(const MixedIntegerProgram& mip, std::span<const double> x) {
  ProgramBuilder b(mip.model);
  for (int c : mip.integers) {
    const double v = std::round(x[c]);
    b.set_bounds(c, v, v);
  }
  return b.build();
}

}  // namespace carbamm::ir

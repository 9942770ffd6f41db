#pragma once

#include <span>
#include <string>
#include <vector>

#include "carbamm/ir/program.hpp"

namespace carbamm::ir {

// sum(coef * x) + constant
struct AffineExpr {
  std::vector<Term> terms;
  double constant = 0.0;

  double eval(std::span<const double> x) const;
};

// slack >= 0 and multiplier >= 0 must hold at every feasible point of the
// host program; the encoding adds slack <= M_s (1 - z), multiplier <= M_m z.
struct ComplementarityPair {
  std::string label;
  AffineExpr slack;
  int multiplier = -1;
  double slack_big_m = 0.0;
  double multiplier_big_m = 0.0;
  int binary = -1;
};

// Slack of ">=" row r (activity - rhs); coupling rows give rhs - activity.
AffineExpr row_slack(const ConvexProgram& program, int row);

// Upper bound of an affine expression over the variable box, or +inf.
double box_upper_bound(const ConvexProgram& program, const AffineExpr& expr);

struct MixedIntegerProgram {
  ConvexProgram model;
  std::vector<int> integers;
  std::vector<ComplementarityPair> pairs;
};

MixedIntegerProgram encode_complementarity(std::vector<ComplementarityPair> pairs,
                                           const ConvexProgram& program);

struct BigMFlag {
  std::string label;
  bool on_slack = false;
  double value = 0.0;
  double big_m = 0.0;
};

// Pairs whose slack or multiplier reaches `threshold` of its big-M.
std::vector<BigMFlag> validate_big_m(const MixedIntegerProgram& mip, std::span<const double> x,
                                     double threshold = 0.99);

// Copy of the model with every integer column fixed at round(x).
ConvexProgram fix_integers(const MixedIntegerProgram& mip, std::span<const double> x);

}  // namespace carbamm::ir

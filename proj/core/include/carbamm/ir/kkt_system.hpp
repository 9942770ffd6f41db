#pragma once

#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "carbamm/ir/complementarity.hpp"
#include "carbamm/ir/program.hpp"
#include "carbamm/ir/solution.hpp"

namespace carbamm::ir {

struct KktOptions {
  double multiplier_big_m = 1e6;
  // Slack big-M is the box bound of the slack times this margin.
  double slack_margin = 1.5;
  double slack_fallback = 1e6;
  // Players whose stationarity rows get penalized elastic slacks.
  std::set<int> elastic_players;
  double elastic_penalty = 1.0;
};

struct PlayerLayout {
  std::string name;
  ConvexProgram program;
  int primal_offset = 0;
  std::vector<int> row_dual;    // joint column of each row's multiplier
  std::vector<int> lower_dual;  // -1 when the bound is infinite
  std::vector<int> upper_dual;
  std::vector<int> fixed_dual;  // free multiplier of fixed columns, else -1
  std::vector<AffineExpr> bindings;
  std::vector<int> stationarity_rows;
  std::vector<int> elastic_cols;  // pairs (plus, minus) when elastic
};

class KktSystem {
 public:
  const MixedIntegerProgram& mip() const { return mip_; }
  const std::vector<PlayerLayout>& players() const { return players_; }
  int player_index(std::string_view name) const;
  int column(std::string_view name, int index = 0) const { return mip_.model.col(name, index); }

  std::vector<double> player_params(int player, std::span<const double> x) const;
  ConvexProgram player_program(int player, std::span<const double> x) const;
  Solution player_solution(int player, std::span<const double> x) const;
  KktResiduals player_residuals(int player, std::span<const double> x) const;
  double elastic_total(std::span<const double> x) const;

 private:
  friend class KktSystemBuilder;
  MixedIntegerProgram mip_;
  std::vector<PlayerLayout> players_;
};

// Stacks the KKT conditions of several convex players into one
// mixed-integer feasibility program. Player parameters are bound to affine
// expressions of joint columns (other players' primals or free joint
// variables), so rival decisions enter as data in each player's problem.
class KktSystemBuilder {
 public:
  explicit KktSystemBuilder(std::string name = "kkt");

  int add_variable(std::string name, double lower, double upper, std::string unit = {});
  int add_player(std::string name, ConvexProgram program);
  int primal(int player, std::string_view block, int index = 0) const;
  void bind(int player, std::string_view param, AffineExpr expr);
  void bind_constant(int player, std::string_view param, double value);
  // Joint row outside any player's optimality system (market clearing).
  int add_row(RowKind kind, std::vector<Term> terms, double rhs, std::string label = {});
  // Linear objective on joint columns; default is a pure feasibility problem.
  void add_objective(int col, double coef);

  KktSystem build(const KktOptions& options = {}) const;

 private:
  ProgramBuilder joint_;
  std::vector<PlayerLayout> players_;
  std::vector<std::vector<bool>> bound_;
  struct JointRow {
    RowKind kind;
    std::vector<Term> terms;
    double rhs;
    std::string label;
  };
  std::vector<JointRow> rows_;
  std::vector<Term> objective_;
};

}  // namespace carbamm::ir

#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace carbamm::ir {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Row kinds of the standard form. Coupling rows are "<=" and carry the
// identity of a dual shared with other programs.
enum class RowKind { kEqual, kGreaterEqual, kCoupling };

struct Term {
  int col = 0;
  double coef = 0.0;
};

struct VariableBlock {
  std::string name;
  int offset = 0;
  int length = 0;
  std::string unit;
};

struct QuadEntry {
  int row = 0;  // row <= col
  int col = 0;
  double value = 0.0;
};

struct ParamTerm {
  int index = 0;  // row or column, depending on context
  int param = 0;
  double coef = 0.0;
};

using Schedule = std::map<std::string, std::vector<double>>;
using ParameterValues = std::unordered_map<std::string, double>;

// Immutable LP/QP in the form
//   min  c'x + x'Qx + k
//   s.t. rows of kind =, >=, <= (coupling); lower <= x <= upper.
// Costs and right-hand sides may carry named parameters that are folded in
// by instantiate().
class ConvexProgram {
 public:
  const std::string& name() const { return name_; }
  int num_cols() const { return static_cast<int>(cost_.size()); }
  int num_rows() const { return static_cast<int>(kind_.size()); }

  const std::vector<VariableBlock>& blocks() const { return blocks_; }
  const VariableBlock& block(std::string_view name) const;
  bool has_block(std::string_view name) const;
  int col(std::string_view block, int index = 0) const;
  std::string col_name(int col) const;

  std::span<const double> cost() const { return cost_; }
  double cost_constant() const { return constant_; }
  std::span<const QuadEntry> quadratic() const { return quad_; }
  bool is_linear() const { return quad_.empty(); }
  std::span<const double> lower() const { return lower_; }
  std::span<const double> upper() const { return upper_; }

  RowKind kind(int row) const { return kind_[row]; }
  double rhs(int row) const { return rhs_[row]; }
  std::span<const Term> row(int r) const;
  const std::string& row_label(int r) const { return label_[r]; }
  const std::string& shared_dual(int r) const { return shared_[r]; }
  int find_row(std::string_view label) const;

  const std::vector<std::string>& params() const { return params_; }
  int param_index(std::string_view name) const;
  std::span<const ParamTerm> cost_params() const { return cost_params_; }
  std::span<const ParamTerm> rhs_params() const { return rhs_params_; }

  // Resolve named values against the parameter table; missing names throw.
  std::vector<double> resolve(const ParameterValues& values) const;
  ConvexProgram instantiate(const ParameterValues& values) const;
  ConvexProgram instantiate(std::span<const double> values) const;

  double objective(std::span<const double> x) const;
  // Qx (not 2Qx).
  std::vector<double> quad_times(std::span<const double> x) const;
  double row_activity(int r, std::span<const double> x) const;

  Schedule unpack(std::span<const double> x) const;
  std::vector<double> pack(const Schedule& schedule) const;

 private:
  friend class ProgramBuilder;
  friend ConvexProgram linearize(const ConvexProgram&, std::span<const double>);

  std::string name_;
  std::vector<VariableBlock> blocks_;
  std::vector<double> cost_;
  double constant_ = 0.0;
  std::vector<QuadEntry> quad_;
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<RowKind> kind_;
  std::vector<double> rhs_;
  std::vector<int> row_start_{0};
  std::vector<Term> terms_;
  std::vector<std::string> label_;
  std::vector<std::string> shared_;
  std::vector<std::string> params_;
  std::vector<ParamTerm> cost_params_;
  std::vector<ParamTerm> rhs_params_;
};

class ProgramBuilder {
 public:
  explicit ProgramBuilder(std::string name = "program");
  // Reopen an existing program for extension.
  explicit ProgramBuilder(const ConvexProgram& base);

  int add_block(std::string name, int length, double lower, double upper,
                std::string unit = {});
  int add_block(std::string name, std::vector<double> lower,
                std::vector<double> upper, std::string unit = {});
  int num_cols() const { return static_cast<int>(p_.cost_.size()); }
  int num_rows() const { return static_cast<int>(p_.kind_.size()); }
  int col(std::string_view block, int index = 0) const;
  bool has_block(std::string_view name) const;

  void set_bounds(int col, double lower, double upper);
  double lower(int col) const { return p_.lower_[col]; }
  double upper(int col) const { return p_.upper_[col]; }
  void add_cost(int col, double coef);
  void add_constant(double value);
  // Adds value * x_i * x_j to the objective.
  void add_quadratic(int i, int j, double value);

  int param(std::string_view name);
  void add_cost_param(int col, int param, double coef);
  void add_rhs_param(int row, int param, double coef);

  int add_row(RowKind kind, std::vector<Term> terms, double rhs,
              std::string label = {}, std::string shared = {});
  int add_eq(std::vector<Term> terms, double rhs, std::string label = {});
  int add_ge(std::vector<Term> terms, double rhs, std::string label = {});
  // Stored as the negated ">=" row.
  int add_le(std::vector<Term> terms, double rhs, std::string label = {});
  int add_coupling(std::vector<Term> terms, double rhs, std::string shared,
                   std::string label = {});

  ConvexProgram build() const;

 private:
  ConvexProgram p_;
  std::unordered_map<std::string, int> block_index_;
  std::map<std::pair<int, int>, double> quad_;
};

void validate(const ConvexProgram& program);

// First-order model of the objective at x_ref: quadratic terms are replaced
// by their tangent, so both objectives agree in value and gradient there.
ConvexProgram linearize(const ConvexProgram& program, std::span<const double> x_ref);

}  // namespace carbamm::ir

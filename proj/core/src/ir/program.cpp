#include "carbamm/ir/program.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>

namespace carbamm::ir {

namespace {

[[noreturn]] void fail(const std::string& what) { throw ModelError(what); }

}  // namespace

const VariableBlock& ConvexProgram::block(std::string_view name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return b;
  }
  fail("unknown variable block '" + std::string(name) + "' in " + name_);
}

bool ConvexProgram::has_block(std::string_view name) const {
  return std::any_of(blocks_.begin(), blocks_.end(),
                     [&](const VariableBlock& b) { return b.name == name; });
}

int ConvexProgram::col(std::string_view name, int index) const {
  const auto& b = block(name);
  if (index < 0 || index >= b.length) {
    fail("index " + std::to_string(index) + " out of range for block '" +
         b.name + "'");
  }
  return b.offset + index;
}

std::string ConvexProgram::col_name(int c) const {
  for (const auto& b : blocks_) {
    if (c >= b.offset && c < b.offset + b.length) {
      return b.length == 1 ? b.name
                           : b.name + "[" + std::to_string(c - b.offset) + "]";
    }
  }
  return "x" + std::to_string(c);
}

std::span<const Term> ConvexProgram::row(int r) const {
  return std::span<const Term>(terms_).subspan(
      row_start_[r], row_start_[r + 1] - row_start_[r]);
}

int ConvexProgram::find_row(std::string_view label) const {
  for (int r = 0; r < num_rows(); ++r) {
    if (label_[r] == label) return r;
  }
  return -1;
}

int ConvexProgram::param_index(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<double> ConvexProgram::resolve(const ParameterValues& values) const {
  std::vector<double> out(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto it = values.find(params_[i]);
    if (it == values.end()) fail("missing value for parameter '" + params_[i] + "'");
    out[i] = it->second;
  }
  return out;
}

ConvexProgram ConvexProgram::instantiate(const ParameterValues& values) const {
  return instantiate(resolve(values));
}

ConvexProgram ConvexProgram::instantiate(std::span<const double> values) const {
  if (values.size() != params_.size()) fail("parameter vector has wrong length");
  ConvexProgram out = *this;
  for (const auto& t : cost_params_) out.cost_[t.index] += t.coef * values[t.param];
  for (const auto& t : rhs_params_) out.rhs_[t.index] += t.coef * values[t.param];
  out.params_.clear();
  out.cost_params_.clear();
  out.rhs_params_.clear();
  return out;
}

double ConvexProgram::objective(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != num_cols()) fail("dimension mismatch in objective");
  double f = constant_;
  for (int j = 0; j < num_cols(); ++j) f += cost_[j] * x[j];
  for (const auto& q : quad_) {
    f += (q.row == q.col ? 1.0 : 2.0) * q.value * x[q.row] * x[q.col];
  }
  return f;
}

std::vector<double> ConvexProgram::quad_times(std::span<const double> x) const {
  std::vector<double> out(num_cols(), 0.0);
  for (const auto& q : quad_) {
    out[q.row] += q.value * x[q.col];
    if (q.row != q.col) out[q.col] += q.value * x[q.row];
  }
  return out;
}

double ConvexProgram::row_activity(int r, std::span<const double> x) const {
  double a = 0.0;
  for (const auto& t : row(r)) a += t.coef * x[t.col];
  return a;
}

Schedule ConvexProgram::unpack(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != num_cols()) fail("dimension mismatch in unpack");
  Schedule out;
  for (const auto& b : blocks_) {
    out[b.name].assign(x.begin() + b.offset, x.begin() + b.offset + b.length);
  }
  return out;
}

std::vector<double> ConvexProgram::pack(const Schedule& schedule) const {
  std::vector<double> x(num_cols(), 0.0);
  for (const auto& b : blocks_) {
    auto it = schedule.find(b.name);
    if (it == schedule.end()) fail("schedule lacks block '" + b.name + "'");
    if (static_cast<int>(it->second.size()) != b.length) {
      fail("schedule block '" + b.name + "' has wrong length");
    }
    std::copy(it->second.begin(), it->second.end(), x.begin() + b.offset);
  }
  return x;
}

ProgramBuilder::ProgramBuilder(std::string name) { p_.name_ = std::move(name); }

ProgramBuilder::ProgramBuilder(const ConvexProgram& base) : p_(base) {
  for (std::size_t i = 0; i < p_.blocks_.size(); ++i) {
    block_index_[p_.blocks_[i].name] = static_cast<int>(i);
  }
  for (const auto& q : p_.quad_) quad_[{q.row, q.col}] = q.value;
  p_.quad_.clear();
}

int ProgramBuilder::add_block(std::string name, int length, double lower,
                              double upper, std::string unit) {
  if (length <= 0) fail("block '" + name + "' must have positive length");
  return add_block(std::move(name), std::vector<double>(length, lower),
                   std::vector<double>(length, upper), std::move(unit));
}

int ProgramBuilder::add_block(std::string name, std::vector<double> lower,
                              std::vector<double> upper, std::string unit) {
  if (lower.empty()) fail("block '" + name + "' must have positive length");
  if (lower.size() != upper.size()) fail("bound vectors of block '" + name + "' differ in length");
  if (block_index_.count(name)) fail("duplicate block name '" + name + "'");
  const int offset = num_cols();
  block_index_[name] = static_cast<int>(p_.blocks_.size());
  p_.blocks_.push_back({name, offset, static_cast<int>(lower.size()), std::move(unit)});
  p_.lower_.insert(p_.lower_.end(), lower.begin(), lower.end());
  p_.upper_.insert(p_.upper_.end(), upper.begin(), upper.end());
  p_.cost_.resize(p_.lower_.size(), 0.0);
  return offset;
}

int ProgramBuilder::col(std::string_view name, int index) const {
  auto it = block_index_.find(std::string(name));
  if (it == block_index_.end()) fail("unknown variable block '" + std::string(name) + "'");
  const auto& b = p_.blocks_[it->second];
  if (index < 0 || index >= b.length) {
    fail("index " + std::to_string(index) + " out of range for block '" + b.name + "'");
  }
  return b.offset + index;
}

bool ProgramBuilder::has_block(std::string_view name) const {
  return block_index_.count(std::string(name)) > 0;
}

void ProgramBuilder::set_bounds(int c, double lower, double upper) {
  p_.lower_.at(c) = lower;
  p_.upper_.at(c) = upper;
}

void ProgramBuilder::add_cost(int c, double coef) { p_.cost_.at(c) += coef; }

void ProgramBuilder::add_constant(double value) { p_.constant_ += value; }

void ProgramBuilder::add_quadratic(int i, int j, double value) {
  if (i < 0 || j < 0 || i >= num_cols() || j >= num_cols()) {
    fail("quadratic term references unknown column");
  }
  if (i == j) {
    quad_[{i, i}] += value;
  } else {
    quad_[{std::min(i, j), std::max(i, j)}] += 0.5 * value;
  }
}

int ProgramBuilder::param(std::string_view name) {
  const int found = p_.param_index(name);
  if (found >= 0) return found;
  p_.params_.emplace_back(name);
  return static_cast<int>(p_.params_.size()) - 1;
}

void ProgramBuilder::add_cost_param(int c, int param, double coef) {
  if (c < 0 || c >= num_cols()) fail("cost parameter references unknown column");
  p_.cost_params_.push_back({c, param, coef});
}

void ProgramBuilder::add_rhs_param(int r, int param, double coef) {
  if (r < 0 || r >= num_rows()) fail("rhs parameter references unknown row");
  p_.rhs_params_.push_back({r, param, coef});
}

int ProgramBuilder::add_row(RowKind kind, std::vector<Term> terms, double rhs,
                            std::string label, std::string shared) {
  if (kind == RowKind::kCoupling && shared.empty()) {
    fail("coupling row '" + label + "' lacks a shared dual identity");
  }
  if (kind != RowKind::kCoupling && !shared.empty()) {
    fail("row '" + label + "' is not a coupling row");
  }
  std::sort(terms.begin(), terms.end(),
            [](const Term& a, const Term& b) { return a.col < b.col; });
  std::vector<Term> merged;
  for (const auto& t : terms) {
    if (t.col < 0 || t.col >= num_cols()) {
      fail("row '" + label + "' references unknown column");
    }
    if (!merged.empty() && merged.back().col == t.col) {
      merged.back().coef += t.coef;
    } else {
      merged.push_back(t);
    }
  }
  std::erase_if(merged, [](const Term& t) { return t.coef == 0.0; });
  p_.kind_.push_back(kind);
  p_.rhs_.push_back(rhs);
  p_.terms_.insert(p_.terms_.end(), merged.begin(), merged.end());
  p_.row_start_.push_back(static_cast<int>(p_.terms_.size()));
  p_.label_.push_back(std::move(label));
  p_.shared_.push_back(std::move(shared));
  return num_rows() - 1;
}

int ProgramBuilder::add_eq(std::vector<Term> terms, double rhs, std::string label) {
  return add_row(RowKind::kEqual, std::move(terms), rhs, std::move(label));
}

int ProgramBuilder::add_ge(std::vector<Term> terms, double rhs, std::string label) {
  return add_row(RowKind::kGreaterEqual, std::move(terms), rhs, std::move(label));
}

int ProgramBuilder::add_le(std::vector<Term> terms, double rhs, std::string label) {
  for (auto& t : terms) t.coef = -t.coef;
  return add_row(RowKind::kGreaterEqual, std::move(terms), -rhs, std::move(label));
}

int ProgramBuilder::add_coupling(std::vector<Term> terms, double rhs,
                                 std::string shared, std::string label) {
  return add_row(RowKind::kCoupling, std::move(terms), rhs, std::move(label),
                 std::move(shared));
}

ConvexProgram ProgramBuilder::build() const {
  ConvexProgram out = p_;
  out.quad_.clear();
  for (const auto& [key, value] : quad_) {
    if (value != 0.0) out.quad_.push_back({key.first, key.second, value});
  }
  validate(out);
  return out;
}

ConvexProgram linearize(const ConvexProgram& p, std::span<const double> x_ref) {
  if (static_cast<int>(x_ref.size()) != p.num_cols()) fail("dimension mismatch in linearize");
  ConvexProgram out = p;
  const auto qx = p.quad_times(x_ref);
  double xqx = 0.0;
  for (int j = 0; j < p.num_cols(); ++j) {
    out.cost_[j] += 2.0 * qx[j];
    xqx += x_ref[j] * qx[j];
  }
  out.constant_ -= xqx;
  out.quad_.clear();
  return out;
}

void validate(const ConvexProgram& p) {
  const int n = p.num_cols();
  if (static_cast<int>(p.lower().size()) != n || static_cast<int>(p.upper().size()) != n) {
    fail("dimension mismatch between cost and bounds");
  }
  std::set<std::string> names;
  int expected = 0;
  for (const auto& b : p.blocks()) {
    if (b.length <= 0) fail("block '" + b.name + "' must have positive length");
    if (!names.insert(b.name).second) fail("duplicate block name '" + b.name + "'");
    if (b.offset != expected) fail("dimension mismatch in block layout");
    expected += b.length;
  }
  if (expected != n) fail("dimension mismatch: blocks do not cover all columns");
  for (int j = 0; j < n; ++j) {
    if (std::isnan(p.lower()[j]) || std::isnan(p.upper()[j]) || p.lower()[j] > p.upper()[j]) {
      fail("lower bound exceeds upper bound for " + p.col_name(j));
    }
    if (!std::isfinite(p.cost()[j])) fail("non-finite cost on " + p.col_name(j));
  }
  for (int r = 0; r < p.num_rows(); ++r) {
    if (!std::isfinite(p.rhs(r))) fail("non-finite right-hand side in row " + p.row_label(r));
    for (const auto& t : p.row(r)) {
      if (!std::isfinite(t.coef)) fail("non-finite coefficient in row " + p.row_label(r));
    }
  }
  for (const auto& t : p.cost_params()) {
    if (t.param < 0 || t.param >= static_cast<int>(p.params().size())) fail("unknown parameter index");
  }
  for (const auto& t : p.rhs_params()) {
    if (t.param < 0 || t.param >= static_cast<int>(p.params().size())) fail("unknown parameter index");
  }
  if (p.quadratic().empty()) return;

  std::vector<int> idx;
  for (const auto& q : p.quadratic()) {
    idx.push_back(q.row);
    idx.push_back(q.col);
  }
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  const int m = static_cast<int>(idx.size());
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(m, m);
  auto pos = [&](int c) {
    return static_cast<int>(std::lower_bound(idx.begin(), idx.end(), c) - idx.begin());
  };
  double scale = 1.0;
  for (const auto& e : p.quadratic()) {
    if (!std::isfinite(e.value)) fail("non-finite quadratic coefficient");
    const int a = pos(e.row);
    const int b = pos(e.col);
    q(a, b) = e.value;
    q(b, a) = e.value;
    scale = std::max(scale, std::abs(e.value));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-10 * scale) fail("indefinite quadratic term");
}

}  // namespace carbamm::ir

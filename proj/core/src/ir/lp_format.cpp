#include "carbamm/ir/lp_format.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace carbamm::ir {

namespace {

std::string num(double v) {
  if (v == kInf) return "+inf";
  if (v == -kInf) return "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string var(const ConvexProgram& p, int c) {
  std::string s = p.col_name(c);
  for (char& ch : s) {
    if (ch == '[') ch = '(';
    if (ch == ']') ch = ')';
  }
  return s;
}

void write_terms(std::ostream& os, const ConvexProgram& p, std::span<const Term> terms) {
  bool first = true;
  for (const auto& t : terms) {
    if (t.coef < 0) {
      os << " - " << num(-t.coef) << ' ' << var(p, t.col);
    } else {
      os << (first ? " " : " + ") << num(t.coef) << ' ' << var(p, t.col);
    }
    first = false;
  }
  if (terms.empty()) os << " 0";
}

}  // namespace

void write_lp(std::ostream& os, const ConvexProgram& p) {
  os << "\\ " << p.name() << '\n';
  if (!p.params().empty()) {
    os << "\\ parameters:";
    for (const auto& name : p.params()) os << ' ' << name;
    os << '\n';
  }
  os << "Minimize\n obj:";
  std::vector<Term> lin;
  for (int j = 0; j < p.num_cols(); ++j) {
    if (p.cost()[j] != 0.0) lin.push_back({j, p.cost()[j]});
  }
  write_terms(os, p, lin);
  if (!p.is_linear()) {
    // LP files carry [x'Hx]/2 with H = 2Q.
    os << " + [";
    bool first = true;
    for (const auto& q : p.quadratic()) {
      const double v = (q.row == q.col ? 2.0 : 4.0) * q.value;
      os << (first ? " " : (v < 0 ? " - " : " + ")) << num(first ? v : std::abs(v)) << ' ';
      if (q.row == q.col) {
        os << var(p, q.row) << " ^2";
      } else {
        os << var(p, q.row) << " * " << var(p, q.col);
      }
      first = false;
    }
    os << " ] / 2";
  }
  if (p.cost_constant() != 0.0) os << " + " << num(p.cost_constant());
  os << "\nSubject To\n";
  for (int r = 0; r < p.num_rows(); ++r) {
    os << ' ' << (p.row_label(r).empty() ? "r" + std::to_string(r) : p.row_label(r)) << ':';
    write_terms(os, p, p.row(r));
    switch (p.kind(r)) {
      case RowKind::kEqual: os << " = "; break;
      case RowKind::kGreaterEqual: os << " >= "; break;
      case RowKind::kCoupling: os << " <= "; break;
    }
    os << num(p.rhs(r));
    if (p.kind(r) == RowKind::kCoupling) os << " \\ shared " << p.shared_dual(r);
    os << '\n';
  }
  os << "Bounds\n";
  for (int j = 0; j < p.num_cols(); ++j) {
    const double lo = p.lower()[j];
    const double hi = p.upper()[j];
    if (lo == 0.0 && hi == kInf) continue;
    if (lo == -kInf && hi == kInf) {
      os << ' ' << var(p, j) << " free\n";
    } else if (lo == hi) {
      os << ' ' << var(p, j) << " = " << num(lo) << '\n';
    } else {
      os << ' ' << num(lo) << " <= " << var(p, j) << " <= " << num(hi) << '\n';
    }
  }
  os << "End\n";
}

std::string to_lp_string(const ConvexProgram& p) {
  std::ostringstream os;
  write_lp(os, p);
  return os.str();
}

}  // namespace carbamm::ir

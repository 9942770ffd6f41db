#include "carbamm/ir/kkt_system.hpp"

#include <cmath>
#include <map>

namespace carbamm::ir {

KktSystemBuilder::KktSystemBuilder(std::string name) : joint_(std::move(name)) {}

int KktSystemBuilder::add_variable(std::string name, double lower, double upper, std::string unit) {
  return joint_.add_block(std::move(name), 1, lower, upper, std::move(unit));
}

int KktSystemBuilder::add_player(std::string name, ConvexProgram program) {
  PlayerLayout layout;
  layout.name = name;
  layout.primal_offset = joint_.num_cols();
  for (const auto& blk : program.blocks()) {
    std::vector<double> lo(program.lower().begin() + blk.offset,
                           program.lower().begin() + blk.offset + blk.length);
    std::vector<double> hi(program.upper().begin() + blk.offset,
                           program.upper().begin() + blk.offset + blk.length);
    joint_.add_block(name + "." + blk.name, std::move(lo), std::move(hi), blk.unit);
  }
  layout.bindings.resize(program.params().size());
  bound_.emplace_back(program.params().size(), false);
  layout.program = std::move(program);
  players_.push_back(std::move(layout));
  return static_cast<int>(players_.size()) - 1;
}

int KktSystemBuilder::primal(int player, std::string_view block, int index) const {
  const auto& p = players_.at(player);
  return p.primal_offset + p.program.col(block, index);
}

void KktSystemBuilder::bind(int player, std::string_view param, AffineExpr expr) {
  auto& p = players_.at(player);
  const int k = p.program.param_index(param);
  if (k < 0) {
    throw ModelError("player '" + p.name + "' has no parameter '" + std::string(param) + "'");
  }
  for (const auto& t : expr.terms) {
    if (t.col < 0 || t.col >= joint_.num_cols()) {
      throw ModelError("binding of '" + std::string(param) + "' references unknown column");
    }
  }
  p.bindings[k] = std::move(expr);
  bound_[player][k] = true;
}

void KktSystemBuilder::bind_constant(int player, std::string_view param, double value) {
  bind(player, param, AffineExpr{{}, value});
}

int KktSystemBuilder::add_row(RowKind kind, std::vector<Term> terms, double rhs, std::string label) {
  rows_.push_back({kind, std::move(terms), rhs, std::move(label)});
  return static_cast<int>(rows_.size()) - 1;
}

void KktSystemBuilder::add_objective(int col, double coef) { objective_.push_back({col, coef}); }

KktSystem KktSystemBuilder::build(const KktOptions& opt) const {
  KktSystem out;
  ProgramBuilder b = joint_;
  auto players = players_;
  std::vector<ComplementarityPair> pairs;
  std::map<std::string, int> shared_phi;

  auto slack_m = [&](const AffineExpr& e) {
    double ub = e.constant;
    for (const auto& t : e.terms) ub += t.coef > 0 ? t.coef * b.upper(t.col) : t.coef * b.lower(t.col);
    if (!std::isfinite(ub)) return opt.slack_fallback;
    return std::max(ub * opt.slack_margin, 1.0);
  };
  auto add_pair = [&](std::string label, AffineExpr slack, int mult) {
    ComplementarityPair pair;
    pair.slack_big_m = slack_m(slack);
    pair.label = std::move(label);
    pair.slack = std::move(slack);
    pair.multiplier = mult;
    pair.multiplier_big_m = opt.multiplier_big_m;
    pairs.push_back(std::move(pair));
  };

  for (std::size_t k = 0; k < players.size(); ++k) {
    auto& pl = players[k];
    const auto& P = pl.program;
    for (std::size_t i = 0; i < P.params().size(); ++i) {
      if (!bound_[k][i]) {
        throw ModelError("parameter '" + P.params()[i] + "' of player '" + pl.name + "' is not bound");
      }
    }
    const int n = P.num_cols();
    const int m = P.num_rows();
    const int off = pl.primal_offset;
    const std::string& nm = pl.name;

    int n_eq = 0, n_ge = 0;
    for (int r = 0; r < m; ++r) {
      if (P.kind(r) == RowKind::kEqual) ++n_eq;
      if (P.kind(r) == RowKind::kGreaterEqual) ++n_ge;
    }
    const int eq0 = n_eq ? b.add_block(nm + ".lambda", n_eq, -kInf, kInf) : -1;
    const int ge0 = n_ge ? b.add_block(nm + ".mu", n_ge, 0.0, kInf) : -1;
    pl.row_dual.assign(m, -1);
    std::vector<bool> first_shared(m, false);
    for (int r = 0, ie = 0, ig = 0; r < m; ++r) {
      switch (P.kind(r)) {
        case RowKind::kEqual: pl.row_dual[r] = eq0 + ie++; break;
        case RowKind::kGreaterEqual: pl.row_dual[r] = ge0 + ig++; break;
        case RowKind::kCoupling: {
          auto it = shared_phi.find(P.shared_dual(r));
          if (it == shared_phi.end()) {
            const int c = b.add_block("phi." + P.shared_dual(r), 1, 0.0, kInf);
            it = shared_phi.emplace(P.shared_dual(r), c).first;
            first_shared[r] = true;
          }
          pl.row_dual[r] = it->second;
          break;
        }
      }
    }
    pl.lower_dual.assign(n, -1);
    pl.upper_dual.assign(n, -1);
    pl.fixed_dual.assign(n, -1);
    int n_lo = 0, n_hi = 0, n_fx = 0;
    for (int j = 0; j < n; ++j) {
      const double lo = P.lower()[j], hi = P.upper()[j];
      if (lo == hi) {
        ++n_fx;
      } else {
        if (std::isfinite(lo)) ++n_lo;
        if (std::isfinite(hi)) ++n_hi;
      }
    }
    int lo0 = n_lo ? b.add_block(nm + ".zl", n_lo, 0.0, kInf) : -1;
    int hi0 = n_hi ? b.add_block(nm + ".zu", n_hi, 0.0, kInf) : -1;
    int fx0 = n_fx ? b.add_block(nm + ".zfix", n_fx, -kInf, kInf) : -1;
    for (int j = 0; j < n; ++j) {
      const double lo = P.lower()[j], hi = P.upper()[j];
      if (lo == hi) {
        pl.fixed_dual[j] = fx0++;
        continue;
      }
      if (std::isfinite(lo)) {
        pl.lower_dual[j] = lo0++;
        add_pair(nm + ".lb:" + P.col_name(j), AffineExpr{{{off + j, 1.0}}, -lo}, pl.lower_dual[j]);
      }
      if (std::isfinite(hi)) {
        pl.upper_dual[j] = hi0++;
        add_pair(nm + ".ub:" + P.col_name(j), AffineExpr{{{off + j, -1.0}}, hi}, pl.upper_dual[j]);
      }
    }

    // Primal rows with parameters substituted by their bindings.
    std::vector<std::vector<ParamTerm>> rhs_params(m);
    for (const auto& t : P.rhs_params()) rhs_params[t.index].push_back(t);
    for (int r = 0; r < m; ++r) {
      if (P.kind(r) == RowKind::kCoupling && !first_shared[r]) continue;
      std::vector<Term> terms;
      for (const auto& t : P.row(r)) terms.push_back({off + t.col, t.coef});
      double rhs = P.rhs(r);
      for (const auto& t : rhs_params[r]) {
        const auto& e = pl.bindings[t.param];
        for (const auto& bt : e.terms) terms.push_back({bt.col, -t.coef * bt.coef});
        rhs += t.coef * e.constant;
      }
      const std::string label = nm + ".row:" + (P.row_label(r).empty() ? std::to_string(r) : P.row_label(r));
      switch (P.kind(r)) {
        case RowKind::kEqual: b.add_eq(terms, rhs, label); break;
        case RowKind::kGreaterEqual:
          b.add_ge(terms, rhs, label);
          add_pair(label, AffineExpr{terms, -rhs}, pl.row_dual[r]);
          break;
        case RowKind::kCoupling: {
          b.add_le(terms, rhs, label);
          AffineExpr e{{}, rhs};
          for (const auto& t : terms) e.terms.push_back({t.col, -t.coef});
          add_pair(label, std::move(e), pl.row_dual[r]);
          break;
        }
      }
    }

    // Stationarity: c + 2Qx - A_eq'lambda - A_ge'mu + A_cpl'phi - zl + zu = 0.
    std::vector<std::vector<Term>> stat(n);
    std::vector<double> constant(P.cost().begin(), P.cost().end());
    for (const auto& t : P.cost_params()) {
      const auto& e = pl.bindings[t.param];
      for (const auto& bt : e.terms) stat[t.index].push_back({bt.col, t.coef * bt.coef});
      constant[t.index] += t.coef * e.constant;
    }
    for (const auto& q : P.quadratic()) {
      stat[q.row].push_back({off + q.col, 2.0 * q.value});
      if (q.row != q.col) stat[q.col].push_back({off + q.row, 2.0 * q.value});
    }
    for (int r = 0; r < m; ++r) {
      const double sign = P.kind(r) == RowKind::kCoupling ? 1.0 : -1.0;
      for (const auto& t : P.row(r)) stat[t.col].push_back({pl.row_dual[r], sign * t.coef});
    }
    const bool elastic = opt.elastic_players.count(static_cast<int>(k)) > 0;
    const int el0 = elastic ? b.add_block(nm + ".elastic", 2 * n, 0.0, kInf) : -1;
    for (int j = 0; j < n; ++j) {
      if (pl.lower_dual[j] >= 0) stat[j].push_back({pl.lower_dual[j], -1.0});
      if (pl.upper_dual[j] >= 0) stat[j].push_back({pl.upper_dual[j], 1.0});
      if (pl.fixed_dual[j] >= 0) stat[j].push_back({pl.fixed_dual[j], -1.0});
      if (elastic) {
        stat[j].push_back({el0 + 2 * j, 1.0});
        stat[j].push_back({el0 + 2 * j + 1, -1.0});
        b.add_cost(el0 + 2 * j, opt.elastic_penalty);
        b.add_cost(el0 + 2 * j + 1, opt.elastic_penalty);
        pl.elastic_cols.push_back(el0 + 2 * j);
        pl.elastic_cols.push_back(el0 + 2 * j + 1);
      }
      pl.stationarity_rows.push_back(
          b.add_eq(std::move(stat[j]), -constant[j], nm + ".stat:" + P.col_name(j)));
    }
  }

  for (const auto& row : rows_) b.add_row(row.kind, row.terms, row.rhs, row.label);
  for (const auto& t : objective_) b.add_cost(t.col, t.coef);

  out.mip_ = encode_complementarity(std::move(pairs), b.build());
  out.players_ = std::move(players);
  return out;
}

int KktSystem::player_index(std::string_view name) const {
  for (std::size_t k = 0; k < players_.size(); ++k) {
    if (players_[k].name == name) return static_cast<int>(k);
  }
  throw ModelError("unknown player '" + std::string(name) + "'");
}

std::vector<double> KktSystem::player_params(int player, std::span<const double> x) const {
  const auto& pl = players_.at(player);
  std::vector<double> v;
  for (const auto& e : pl.bindings) v.push_back(e.eval(x));
  return v;
}

ConvexProgram KktSystem::player_program(int player, std::span<const double> x) const {
  return players_.at(player).program.instantiate(player_params(player, x));
}

Solution KktSystem::player_solution(int player, std::span<const double> x) const {
  const auto& pl = players_.at(player);
  const auto& P = pl.program;
  Solution s;
  s.status = SolveStatus::kOptimal;
  s.x.assign(x.begin() + pl.primal_offset, x.begin() + pl.primal_offset + P.num_cols());
  for (int r = 0; r < P.num_rows(); ++r) s.row_dual.push_back(x[pl.row_dual[r]]);
  s.lower_dual.assign(P.num_cols(), 0.0);
  s.upper_dual.assign(P.num_cols(), 0.0);
  for (int j = 0; j < P.num_cols(); ++j) {
    if (pl.lower_dual[j] >= 0) s.lower_dual[j] = x[pl.lower_dual[j]];
    if (pl.upper_dual[j] >= 0) s.upper_dual[j] = x[pl.upper_dual[j]];
    if (pl.fixed_dual[j] >= 0) {
      const double z = x[pl.fixed_dual[j]];
      s.lower_dual[j] = std::max(z, 0.0);
      s.upper_dual[j] = std::max(-z, 0.0);
    }
  }
  s.objective = player_program(player, x).objective(s.x);
  return s;
}

KktResiduals KktSystem::player_residuals(int player, std::span<const double> x) const {
  return kkt_residuals(player_program(player, x), player_solution(player, x));
}

double KktSystem::elastic_total(std::span<const double> x) const {
  double total = 0.0;
  for (const auto& pl : players_) {
    for (int c : pl.elastic_cols) total += std::abs(x[c]);
  }
  return total;
}

}  // namespace carbamm::ir

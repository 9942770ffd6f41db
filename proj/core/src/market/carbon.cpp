#include "carbamm/market/carbon.hpp"

#include <cmath>
#include <limits>

#include "carbamm/models/units.hpp"

namespace carbamm::market {

std::string to_string(Mechanism m) {
  switch (m) {
    case Mechanism::kM1: return "m1";
    case Mechanism::kM2: return "m2";
    case Mechanism::kM3: return "m3";
    case Mechanism::kPcim: return "pcim";
  }
  return "?";
}

Mechanism parse_mechanism(std::string_view text) {
  if (text == "m1" || text == "M1") return Mechanism::kM1;
  if (text == "m2" || text == "M2") return Mechanism::kM2;
  if (text == "m3" || text == "M3") return Mechanism::kM3;
  if (text == "pcim" || text == "PCIM") return Mechanism::kPcim;
  throw ir::ModelError("unknown mechanism '" + std::string(text) + "'");
}

void CarbonLedger::validate() const {
  if (!(q_allo_t >= 0)) throw ir::ModelError("carbon.q_allo_t must be >= 0");
  if (!(q_rewa_t >= 0) || !std::isfinite(q_rewa_t)) throw ir::ModelError("carbon.q_rewa_t must be finite and >= 0");
  if (mechanism == Mechanism::kM3) {
    if (!fixed_price) throw ir::ModelError("mechanism m3 requires a fixed carbon price");
    if (*fixed_price < 0) throw ir::ModelError("carbon.fixed_price must be >= 0");
  }
}

GaCarbonTerms ga_carbon_terms(const CarbonLedger& ledger, bool participates) {
  GaCarbonTerms t;
  switch (ledger.mechanism) {
    case Mechanism::kM1:
      t.cap = false;
      break;
    case Mechanism::kM2:
      t.cap = std::isfinite(ledger.q_allo_t);
      break;
    case Mechanism::kM3:
      t.cap = std::isfinite(ledger.q_allo_t);
      if (participates) {
        t.price = GaCarbonTerms::Price::kFixed;
        t.fixed_price = ledger.fixed_price.value_or(0.0);
        t.purchase_max_t = ledger.q_rewa_t;
      }
      break;
    case Mechanism::kPcim:
      t.cap = std::isfinite(ledger.q_allo_t);
      if (participates) {
        // Only the clearing row limits purchases. A private bound at q_rewa
        // would let a zero price clear an exhausted supply.
        t.price = GaCarbonTerms::Price::kMarket;
        t.purchase_max_t = std::numeric_limits<double>::infinity();
      }
      break;
  }
  return t;
}

ir::ConvexProgram build_carbon_supply(const CarbonLedger& ledger, std::optional<double> pinned_t) {
  ir::ProgramBuilder b("carbon_supply");
  const double hi = ledger.q_rewa_t / units::kBulk;
  int q = 0;
  if (pinned_t) {
    if (*pinned_t < 0 || *pinned_t > ledger.q_rewa_t * (1 + 1e-12)) {
      throw ir::ModelError("pinned allowance volume outside [0, q_rewa]");
    }
    const double v = std::min(*pinned_t, ledger.q_rewa_t) / units::kBulk;
    q = b.add_block("q_all", 1, v, v, "kt");
  } else {
    q = b.add_block("q_all", 1, 0.0, hi, "kt");
  }
  b.add_cost_param(q, b.param("rho_ca"), -1.0);
  return b.build();
}

}  // namespace carbamm::market

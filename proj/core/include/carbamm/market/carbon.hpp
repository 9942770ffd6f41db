#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "carbamm/ir/program.hpp"

namespace carbamm::market {

enum class Mechanism { kM1, kM2, kM3, kPcim };

std::string to_string(Mechanism m);
Mechanism parse_mechanism(std::string_view text);

struct CarbonLedger {
  double q_allo_t = 0.0;
  double q_rewa_t = 0.0;
  Mechanism mechanism = Mechanism::kPcim;
  std::optional<double> fixed_price;  // CNY/t, M3 only

  void validate() const;
};

// How one GA producer sees the carbon market.
struct GaCarbonTerms {
  bool cap = true;                  // emission cap row present
  double purchase_max_t = 0.0;      // upper bound of q_ga, inf under pcim
  enum class Price { kNone, kFixed, kMarket } price = Price::kNone;
  double fixed_price = 0.0;         // CNY/t when price is fixed
};

GaCarbonTerms ga_carbon_terms(const CarbonLedger& ledger, bool participates);

// ReP2A allowance supply: max rho * q_all s.t. 0 <= q_all <= q_rewa, in kt
// and MCNY with the carbon price as parameter "rho_ca". A pinned volume
// fixes q_all.
ir::ConvexProgram build_carbon_supply(const CarbonLedger& ledger,
                                      std::optional<double> pinned_t = std::nullopt);

}  // namespace carbamm::market

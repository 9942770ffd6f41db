#pragma once

// Scaled units used inside the programs. Reports convert back to MW, Nm3,
// t and CNY.
namespace carbamm::units {

// Chain programs (RG, HP, RA).
inline constexpr double kPower = 100.0;     // MW per unit
inline constexpr double kHydrogen = 1.0e4;  // Nm3 (or Nm3/h) per unit
inline constexpr double kMoney = 1.0e4;     // CNY per unit

// Market programs (GA, trading, carbon). Hourly ammonia stays in t/h.
inline constexpr double kBulk = 1.0e3;        // t per unit (kt)
inline constexpr double kMarketMoney = 1.0e6; // CNY per unit (MCNY)

// Price of one chain money unit per (power unit * hour), in CNY/MWh.
inline constexpr double kElectricityPrice = kMoney / kPower;
// CNY/Nm3 per chain price unit.
inline constexpr double kHydrogenPrice = kMoney / kHydrogen;

}  // namespace carbamm::units

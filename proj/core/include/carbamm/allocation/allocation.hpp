#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "carbamm/equilibrium/engine.hpp"

namespace carbamm::allocation {

class AllocationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum Stakeholder { kRg = 0, kHp = 1, kRa = 2 };
inline constexpr std::array<const char*, 3> kStakeholderNames{"rg", "hp", "ra"};

struct AllocationInput {
  double q_all_t = 0.0;                // traded allowances
  double carbon_price = 0.0;           // CNY/t
  std::array<double, 3> baseline{};    // revenues without trading, CNY
  std::array<double, 3> revenue{};     // revenues under trading before allocation, CNY

  double pool() const { return q_all_t * carbon_price; }
  void validate() const;
};

// Revenues of the PCIM run against the revenues of the no-trading run.
AllocationInput allocation_input(const equilibrium::EquilibriumResult& trading,
                                 const equilibrium::EquilibriumResult& baseline);

struct AllocationResult {
  std::string scheme;
  std::array<double, 3> q_t{};
  std::array<double, 3> allocated{};  // revenue after allocation, CNY
  std::array<double, 3> delta_j{};    // relative revenue change
  std::array<bool, 3> ir{};           // delta_j >= 0
  double delta_sum = 0.0;             // sum of pairwise |delta_j_i - delta_j_k|
  bool feasible = true;
  std::string message;
};

// Splits the allowance revenue so that relative gains are as even as
// possible while no stakeholder loses against the baseline. Ties go to the
// split with the largest smallest gain. An infeasible instance is returned
// with feasible = false, the split that maximizes the smallest gain and the
// worst-off stakeholder named in `message`.
AllocationResult allocate_pcam(const AllocationInput& input);

struct Cam1 {
  Stakeholder target = kRa;
};
struct Cam2 {};

AllocationResult allocate_baseline(const AllocationInput& input, Cam1 scheme);
AllocationResult allocate_baseline(const AllocationInput& input, Cam2 scheme);

// Sum of pairwise absolute differences of the relative gains of a split.
double delta_sum(const AllocationInput& input, const std::array<double, 3>& q_t);

struct PerturbationRow {
  double volume_t = 0.0;   // requested
  double applied_t = 0.0;  // pinned volume, capped at q_rewa
  double carbon_price = 0.0;
  double rep2a_total = 0.0;  // CNY, including allowance sales
  AllocationResult allocation;
  std::string error;         // set when the pinned run failed
};

struct PerturbationReport {
  std::vector<PerturbationRow> rows;  // ascending volume
  // Columns: total, rg, hp, ra revenue after allocation.
  std::array<bool, 4> nondecreasing{};
  bool all_nondecreasing() const;
};

// Largest excess over q_rewa that perturb_ir accepts and caps, t.
inline constexpr double kVolumeRounding = 500.0;

// Re-solves the pipeline with the traded volume pinned at each value and
// applies the PCAM against `baseline` (the no-trading equilibrium).
PerturbationReport perturb_ir(equilibrium::Pipeline& pipeline, const std::vector<double>& volumes_t,
                              const equilibrium::EquilibriumResult& baseline);

}  // namespace carbamm::allocation

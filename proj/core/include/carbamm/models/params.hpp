#pragma once

#include <string>
#include <vector>

namespace carbamm::models {

struct TimeGrid {
  int weeks = 12;
  int intervals_per_week = 168;
  double step_h = 1.0;

  int intervals() const { return weeks * intervals_per_week; }
  double week_hours() const { return intervals_per_week * step_h; }
  void validate() const;
};

// Contiguous run of whole weeks of a TimeGrid.
struct Horizon {
  TimeGrid grid;
  int first_week = 0;
  int num_weeks = 1;

  static Horizon full(const TimeGrid& grid) { return {grid, 0, grid.weeks}; }
  static Horizon week(const TimeGrid& grid, int w) { return {grid, w, 1}; }
  int tau() const { return grid.intervals_per_week; }
  double dt() const { return grid.step_h; }
  int intervals() const { return num_weeks * grid.intervals_per_week; }
  // Global interval index of local interval t.
  int global(int t) const { return first_week * grid.intervals_per_week + t; }
  // Previous interval with wrap-around inside the local week.
  int prev_in_week(int t) const {
    const int tau = grid.intervals_per_week;
    return (t % tau == 0) ? t + tau - 1 : t - 1;
  }
};

struct GaParams {
  std::string name = "GA";
  double capacity_tph = 78.3;
  double cost_cny_per_t = 2000.0;
  double emission_t_per_t = 3.0;
  double load_min = 0.0;
  double load_max = 1.0;
  double ramp_down = 1.0;
  double ramp_up = 1.0;
  double allowance_t = 0.0;
  bool participates = true;

  void validate() const;
};

struct BesParams {
  double capacity_mwh = 0.0;
  double eta_charge = 0.95;
  double eta_discharge = 0.95;
  double self_discharge = 0.0;
  double soc_min = 0.1;
  double soc_max = 0.9;
  double degradation_cny_per_mwh = 20.0;

  void validate(const std::string& where) const;
};

struct Bus {
  std::string name;
  double v_min = 0.9025;  // squared voltage, p.u.
  double v_max = 1.1025;
};

struct Branch {
  int from = 0;
  int to = 0;
  double r = 0.0;  // p.u.
  double x = 0.0;
};

struct RenewableUnit {
  int bus = 0;
  double capacity_mw = 0.0;
};

struct RadialNetwork {
  std::vector<Bus> buses;
  std::vector<Branch> branches;

  // Index of the unique bus without a parent; throws if not a tree.
  int root() const;
  void validate() const;
};

struct ResProfile {
  std::vector<double> wt_mw;
  std::vector<double> pv_mw;
};

struct RgParams {
  RadialNetwork network;
  std::vector<RenewableUnit> wt;
  std::vector<RenewableUnit> pv;
  int bes_bus = 0;
  BesParams bes;
  int hp_bus = 0;
  int ra_bus = 0;
  bool reactive_compensation = false;
  double vc_max_mvar = 0.0;
  ResProfile profile;

  double wt_capacity() const;
  double pv_capacity() const;
  void validate(const TimeGrid& grid) const;
};

struct H2Node {
  std::string name;
  double p_min = 1.0;  // MPa
  double p_max = 4.0;
};

struct Pipe {
  int from = 0;
  int to = 0;
  double k_gf = 1.0e4;  // Nm3/h per MPa
  double k_lp = 1.0e4;  // Nm3 per MPa
};

struct PipelineNetwork {
  std::vector<H2Node> nodes;
  std::vector<Pipe> pipes;
  int source = 0;  // node fed by the electrolysis plant
  int sink = 1;    // delivery node of the ammonia plant
  int depth = 6;   // polyhedral approximation depth Z
  double pressure_penalty = 10.0;  // CNY per MPa per hour

  void validate() const;
};

struct StorageParams {
  double capacity = 0.0;
  double soc_min = 0.05;
  double soc_max = 0.95;
  double rate_fraction = 0.5;
};

struct HpParams {
  double ae_capacity_mw = 150.0;
  double eta_p2h = 200.0;      // Nm3/MWh
  double load_min = 0.0;
  double load_max = 1.0;
  double eta_comp = 2.0e-4;    // MW per Nm3/h
  StorageParams hst{1.0e5};    // Nm3
  BesParams bes;
  PipelineNetwork pipeline;

  void validate() const;
};

struct RaParams {
  double asy_capacity_tph = 15.66;
  double eta_h2a = 1.0 / 1950.0;  // t per Nm3
  double eta_p2a = 1.0 / 0.6;     // t per MWh
  double load_min = 0.2;
  double load_max = 1.0;
  double ramp_down = 0.2;
  double ramp_up = 0.2;
  StorageParams hst{2.0e5};       // Nm3
  double ast_capacity_t = 1000.0;
  double backup_price = 600.0;    // CNY/MWh
  std::vector<double> backup_price_profile;  // optional per interval

  double backup(int global_interval) const {
    return backup_price_profile.empty() ? backup_price : backup_price_profile[global_interval];
  }
  void validate() const;
};

}  // namespace carbamm::models

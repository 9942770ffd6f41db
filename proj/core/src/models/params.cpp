#include "carbamm/models/params.hpp"

#include <cmath>
#include <numeric>

#include "carbamm/ir/program.hpp"

namespace carbamm::models {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ir::ModelError(what);
}

}  // namespace

void TimeGrid::validate() const {
  require(weeks >= 1, "time.weeks must be >= 1");
  require(intervals_per_week >= 1, "time.intervals_per_week must be >= 1");
  require(step_h > 0, "time.step_h must be > 0");
}

void GaParams::validate() const {
  const std::string p = "ga '" + name + "': ";
  require(capacity_tph > 0, p + "capacity_tph must be > 0");
  require(emission_t_per_t > 0, p + "emission_t_per_t must be > 0");
  require(load_min >= 0 && load_min <= load_max && load_max <= 1,
          p + "load_min <= load_max within [0, 1] violated");
  require(ramp_down > 0 && ramp_up > 0, p + "ramp fractions must be > 0");
  require(allowance_t >= 0, p + "allowance_t must be >= 0");
}

void BesParams::validate(const std::string& where) const {
  require(capacity_mwh >= 0, where + ".capacity_mwh must be >= 0");
  require(eta_charge > 0 && eta_charge <= 1, where + ".eta_charge must be in (0, 1]");
  require(eta_discharge > 0 && eta_discharge <= 1, where + ".eta_discharge must be in (0, 1]");
  require(self_discharge >= 0 && self_discharge < 1, where + ".self_discharge must be in [0, 1)");
  require(soc_min >= 0 && soc_min <= soc_max && soc_max <= 1, where + ".soc_min <= soc_max within [0, 1] violated");
  require(degradation_cny_per_mwh > 0, where + ".degradation_cny_per_mwh must be > 0");
}

int RadialNetwork::root() const {
  const int n = static_cast<int>(buses.size());
  require(n >= 1, "network has no buses");
  require(static_cast<int>(branches.size()) == n - 1, "network is not radial: needs exactly buses-1 branches");
  std::vector<int> parents(n, 0);
  for (const auto& br : branches) {
    require(br.from >= 0 && br.from < n && br.to >= 0 && br.to < n && br.from != br.to,
            "branch references unknown bus");
    ++parents[br.to];
  }
  int root = -1;
  for (int b = 0; b < n; ++b) {
    require(parents[b] <= 1, "network is not radial: bus '" + buses[b].name + "' has two parents");
    if (parents[b] == 0) {
      require(root < 0, "network is not radial: more than one root");
      root = b;
    }
  }
  require(root >= 0, "network is not radial: no root");
  // Every bus must be reachable from the root.
  std::vector<bool> seen(n, false);
  std::vector<int> stack{root};
  seen[root] = true;
  while (!stack.empty()) {
    const int b = stack.back();
    stack.pop_back();
    for (const auto& br : branches) {
      if (br.from == b && !seen[br.to]) {
        seen[br.to] = true;
        stack.push_back(br.to);
      }
    }
  }
  for (int b = 0; b < n; ++b) require(seen[b], "network is not radial: bus '" + buses[b].name + "' unreachable");
  return root;
}

void RadialNetwork::validate() const {
  root();
  for (const auto& b : buses) {
    require(b.v_min > 0 && b.v_min <= b.v_max, "bus '" + b.name + "' voltage bounds invalid");
  }
  for (const auto& br : branches) require(br.r >= 0 && br.x >= 0, "branch impedance must be >= 0");
}

double RgParams::wt_capacity() const {
  return std::accumulate(wt.begin(), wt.end(), 0.0,
                         [](double s, const RenewableUnit& u) { return s + u.capacity_mw; });
}

double RgParams::pv_capacity() const {
  return std::accumulate(pv.begin(), pv.end(), 0.0,
                         [](double s, const RenewableUnit& u) { return s + u.capacity_mw; });
}

void RgParams::validate(const TimeGrid& grid) const {
  network.validate();
  const int n = static_cast<int>(network.buses.size());
  auto bus_ok = [n](int b) { return b >= 0 && b < n; };
  for (const auto& u : wt) require(bus_ok(u.bus) && u.capacity_mw >= 0, "rg.wt unit invalid");
  for (const auto& u : pv) require(bus_ok(u.bus) && u.capacity_mw >= 0, "rg.pv unit invalid");
  require(bus_ok(bes_bus) && bus_ok(hp_bus) && bus_ok(ra_bus), "rg device bus index out of range");
  bes.validate("rg.bes");
  require(vc_max_mvar >= 0, "rg.vc_max_mvar must be >= 0");
  const auto len = static_cast<std::size_t>(grid.intervals());
  require(profile.wt_mw.size() == len && profile.pv_mw.size() == len,
          "profile length " + std::to_string(profile.wt_mw.size()) + " does not match weeks*intervals = " +
              std::to_string(len));
  const double wcap = wt_capacity(), pcap = pv_capacity();
  for (std::size_t t = 0; t < len; ++t) {
    require(profile.wt_mw[t] >= 0 && profile.wt_mw[t] <= wcap + 1e-9,
            "profile wt_mw[" + std::to_string(t) + "] outside [0, installed capacity]");
    require(profile.pv_mw[t] >= 0 && profile.pv_mw[t] <= pcap + 1e-9,
            "profile pv_mw[" + std::to_string(t) + "] outside [0, installed capacity]");
  }
}

void PipelineNetwork::validate() const {
  const int n = static_cast<int>(nodes.size());
  require(n >= 2, "hp.pipeline needs at least two nodes");
  require(depth >= 1, "hp.pipeline.depth must be >= 1");
  require(pressure_penalty > 0, "hp.pipeline.pressure_penalty must be > 0");
  require(source >= 0 && source < n && sink >= 0 && sink < n && source != sink,
          "hp.pipeline source/sink invalid");
  for (const auto& nd : nodes) {
    require(nd.p_min > 0 && nd.p_min <= nd.p_max, "hp.pipeline node '" + nd.name + "' pressure bounds invalid");
  }
  require(!pipes.empty(), "hp.pipeline has no pipes");
  for (const auto& p : pipes) {
    require(p.from >= 0 && p.from < n && p.to >= 0 && p.to < n && p.from != p.to, "pipe references unknown node");
    require(p.k_gf > 0 && p.k_lp > 0, "pipe constants must be > 0");
  }
}

void HpParams::validate() const {
  require(ae_capacity_mw > 0, "hp.ae.capacity_mw must be > 0");
  require(eta_p2h > 0, "hp.ae.eta_p2h must be > 0");
  require(load_min >= 0 && load_min <= load_max && load_max <= 1, "hp.ae load range invalid");
  require(eta_comp >= 0, "hp.eta_comp must be >= 0");
  require(hst.capacity >= 0 && hst.soc_min <= hst.soc_max, "hp.hst invalid");
  bes.validate("hp.bes");
  pipeline.validate();
}

void RaParams::validate() const {
  require(asy_capacity_tph > 0, "ra.asy.capacity_tph must be > 0");
  require(eta_h2a > 0 && eta_p2a > 0, "ra conversion coefficients must be > 0");
  require(load_min >= 0 && load_min <= load_max && load_max <= 1, "ra.asy load_min <= load_max within [0, 1] violated");
  require(ramp_down > 0 && ramp_up > 0, "ra.asy ramp fractions must be > 0");
  require(hst.capacity >= 0 && hst.soc_min <= hst.soc_max, "ra.hst invalid");
  require(ast_capacity_t >= 0, "ra.ast.capacity_t must be >= 0");
  require(backup_price >= 0, "ra.backup_price must be >= 0");
}

}  // namespace carbamm::models

#pragma once

#include <string>

#include "carbamm/ir/program.hpp"

namespace carbamm::models {

// Relative over-approximation of the depth-Z polyhedral cone on p_m.
double cone_epsilon(int depth);

// Inputs of the cone (flow_scale * x_flow)^2 + p_n^2 <= p_m^2.
struct ConeInputs {
  int flow = -1;
  double flow_scale = 1.0;
  int p_m = -1;
  int p_n = -1;
};

// Adds the rotation-based polyhedral outer approximation of the cone:
// 2(Z+1) auxiliary columns "<label>.xi" and "<label>.omega" and 4+3Z rows.
// Returns the first auxiliary column (xi^0); omega^0 follows xi^Z.
int add_polyhedral_cone(ir::ProgramBuilder& builder, const ConeInputs& in, int depth,
                        const std::string& label);

// Same rows on caller-owned auxiliary columns: xi^z at xi + z*stride and
// omega^z at omega + z*stride, all with bounds [0, inf).
void add_polyhedral_cone(ir::ProgramBuilder& builder, const ConeInputs& in, int depth,
                         const std::string& label, int xi, int omega, int stride);

}  // namespace carbamm::models

#pragma once

#include <ostream>
#include <string>

#include "carbamm/ir/program.hpp"

namespace carbamm::ir {

// Plain-text listing in an LP-file dialect: objective, one constraint per
// line, bounds. Numbers are printed with 12 significant digits.
void write_lp(std::ostream& os, const ConvexProgram& program);
std::string to_lp_string(const ConvexProgram& program);

}  // namespace carbamm::ir

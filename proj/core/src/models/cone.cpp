#include "carbamm/models/cone.hpp"

#include <cmath>
#include <numbers>

namespace carbamm::models {

namespace {
double angle(int z) { return std::numbers::pi / std::ldexp(1.0, z + 1); }
}  // namespace

double cone_epsilon(int depth) {
  if (depth < 1) throw ir::ModelError("polyhedral cone depth must be >= 1");
  return 1.0 / std::cos(angle(depth)) - 1.0;
}

int add_polyhedral_cone(ir::ProgramBuilder& b, const ConeInputs& in, int Z, const std::string& label) {
  if (Z < 1) throw ir::ModelError("polyhedral cone depth must be >= 1");
  const int xi = b.add_block(label + ".xi", Z + 1, 0.0, ir::kInf, "MPa");
  const int om = b.add_block(label + ".omega", Z + 1, 0.0, ir::kInf, "MPa");
  add_polyhedral_cone(b, in, Z, label, xi, om, 1);
  return xi;
}

void add_polyhedral_cone(ir::ProgramBuilder& b, const ConeInputs& in, int Z, const std::string& label,
                         int xi0, int om0, int stride) {
  if (Z < 1) throw ir::ModelError("polyhedral cone depth must be >= 1");
  auto xi = [&](int z) { return xi0 + z * stride; };
  auto om = [&](int z) { return om0 + z * stride; };
  b.add_ge({{xi(0), 1.0}, {in.flow, -in.flow_scale}}, 0.0, label + ".flow");
  b.add_ge({{om(0), 1.0}, {in.p_n, -1.0}}, 0.0, label + ".pn");
  for (int z = 1; z <= Z; ++z) {
    const double s = std::sin(angle(z)), c = std::cos(angle(z));
    const std::string tag = label + ".rot" + std::to_string(z);
    b.add_eq({{xi(z), 1.0}, {om(z - 1), -s}, {xi(z - 1), -c}}, 0.0, tag);
    b.add_ge({{om(z), 1.0}, {om(z - 1), -c}, {xi(z - 1), s}}, 0.0, tag + "+");
    b.add_ge({{om(z), 1.0}, {om(z - 1), c}, {xi(z - 1), -s}}, 0.0, tag + "-");
  }
  b.add_ge({{in.p_m, 1.0}, {xi(Z), -1.0}}, 0.0, label + ".pm");
  b.add_ge({{xi(Z), std::tan(angle(Z))}, {om(Z), -1.0}}, 0.0, label + ".tip");
}

}  // namespace carbamm::models

#pragma once

#include <iosfwd>
#include <string>

#include "calderon/geometry.hpp"

namespace calderon {

// Plain-text mesh format, one record per line:
//   calderon-mesh 1
//   dim <d>
//   param <name> <value>            (geometry parameters, repeated)
//   marked_point <x> <y> <z>
//   rho1_derived <value>
//   vertices <n>   followed by n lines "x y [z]"
//   cells <n>      followed by n lines "v0 v1 v2 [v3] <region>"
//   facets <n>     followed by n lines "v0 v1 [v2] <tag> <cellIn> <cellOut>"
// Floating-point values use %.17g and round-trip exactly.

void dump_mesh(const MeshedDomain& mesh, std::ostream& os);
void dump_mesh(const MeshedDomain& mesh, const std::string& path);
MeshedDomain load_mesh(std::istream& is);
MeshedDomain load_mesh(const std::string& path);

// Companion per-vertex field file:
//   calderon-field 1
//   lambda <l>
//   E <E>
//   E1 <E1>
//   values <n>     followed by n lines with one value each
void dump_field_values(const VecX& values, double lambda, double E, double E1,
                       std::ostream& os);
void dump_field_values(const VecX& values, double lambda, double E, double E1,
                       const std::string& path);
struct FieldFile {
  VecX values;
  double lambda = 0, E = 0, E1 = 0;
};
FieldFile load_field_values(std::istream& is);
FieldFile load_field_values(const std::string& path);

// Dense matrix block: "matrix <name> <rows> <cols>" followed by rows lines.
void dump_matrix(const MatX& m, const std::string& name, std::ostream& os);
MatX load_matrix(std::istream& is, std::string* name = nullptr);

std::string format_double(double v);

}  // namespace calderon

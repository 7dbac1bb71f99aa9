#pragma once

#include "calderon/geometry.hpp"

namespace calderon {

/// Piecewise-linear conductivity coefficient on the mesh vertices, with
/// the a-priori class constants it is required to satisfy.
struct ConductivityField {
  const MeshedDomain* mesh = nullptr;
  VecX values;        // one per vertex
  double lambda = 0.4;
  double E = 50.0;    // bound for the discrete second-difference surrogate
  double E1 = 0.0;    // measured Lipschitz surrogate on the augmented domain

  double at(int vertex) const { return values[vertex]; }
  /// Midpoint value used by the assembly (vertex average per cell).
  double onCell(int cell) const;
};

enum class Profile { Constant, SmoothRamp };
bool profile_from_string(const std::string& s, Profile& out);
const char* to_string(Profile p);

/// Analytic bump shapes supported by perturb_in_D; both have unit peak.
/// CosineBump: cos^2(pi*|x-c| / (2 w)) on |x-c| < w.
/// MollifiedIndicator: quintic smoothstep of (w - |x-c|) / (0.35 w),
/// equal to 1 on |x-c| <= 0.65 w and 0 outside |x-c| >= w.
enum class BumpShape { CosineBump, MollifiedIndicator };
bool bump_from_string(const std::string& s, BumpShape& out);
const char* to_string(BumpShape b);

struct BumpSpec {
  BumpShape shape = BumpShape::CosineBump;
  Vec3 center = Vec3::Zero();
  double width = 0.15;
  double amplitude = 0.0;
};

double bump_value(const BumpSpec& spec, const Vec3& x);

struct ProfileSpec {
  Profile profile = Profile::Constant;
  double value = 1.0;      // constant level
  double rampLow = 1.0;    // smooth-ramp endpoints across Omega
  double rampHigh = 2.0;
};

/// Reference conductivity, defined (already extended) on the whole
/// augmented domain.  Throws when the profile violates ellipticity.
ConductivityField make_reference(const MeshedDomain& mesh, const ProfileSpec& spec,
                                 double lambda, double E);

/// gamma0 plus an amplitude-t bump supported strictly inside D.  The
/// returned field equals gamma0 bit-exactly outside closure(D).
struct PerturbResult {
  ConductivityField gamma;
  double supGap = 0.0;  // max vertex |gamma - gamma0|
};
PerturbResult perturb_in_D(const ConductivityField& gamma0, const BumpSpec& bump);

/// Per-invariant validation report.
struct ConductivityReport {
  struct Check {
    std::string name;
    bool pass = true;
    int worstVertex = -1;
    double worstValue = 0.0;
    double bound = 0.0;
  };
  std::vector<Check> checks;
  double measuredLipschitz = 0.0;   // W^{1,inf} surrogate on the augmented domain
  double measuredSecond = 0.0;      // W^{2,inf} surrogate on Omega
  bool pass() const;
};

ConductivityReport validate(const ConductivityField& gamma);

}  // namespace calderon

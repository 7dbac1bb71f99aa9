#pragma once

// Shared fixtures and independent oracles for the test suites.

#include <cmath>
#include <functional>
#include <random>

#include "calderon/analysis.hpp"
#include "calderon/config.hpp"
#include "calderon/runner.hpp"

namespace testsupport {

using namespace calderon;

inline GeometryParams params2d() {
  GeometryParams p;  // defaults are the bundled 2D disk pipeline
  return p;
}

inline GeometryParams params2d_coarse() {
  GeometryParams p;
  p.h = 0.018;
  return p;
}

inline GeometryParams params3d_ball() {
  GeometryParams p;
  p.dimension = 3;
  p.family = Family::Ball;
  p.omegaRadius = 0.9;
  p.scaffoldR = {0.07, 0.265, 0.46};
  p.rho0 = 0.3;
  p.d0 = 0.3;
  p.rho2 = 0.235;
  p.h1 = 0.117;
  p.h = 0.0285;
  p.sigmaCenter = 0.0;            // polar cap around +z
  p.sigmaHalfWidth = 0.96;        // Sigma cap half-angle (55 deg)
  p.bulgeThickness = 0.9;
  return p;
}

inline const MeshedDomain& mesh2d() {
  static MeshedDomain m = build_domain(params2d());
  return m;
}

inline const MeshGradients& grads2d() {
  static MeshGradients g(mesh2d());
  return g;
}

inline const ConductivityField& gamma0_2d() {
  static ConductivityField g = make_reference(mesh2d(), {}, 0.4, 60.0);
  return g;
}

inline BumpSpec default_bump(double amplitude) {
  BumpSpec b;
  b.shape = BumpShape::CosineBump;
  b.center = Vec3::Zero();  // D is centered at the origin in the disk family
  b.width = 0.15;
  b.amplitude = amplitude;
  return b;
}

// Hand-built unit-square mesh (two triangles), every edge tagged dDtilde.
inline MeshedDomain unit_square_mesh() {
  MeshedDomain m;
  m.dim = 2;
  m.vertices.resize(4, 2);
  m.vertices << 0, 0, 1, 0, 1, 1, 0, 1;
  m.cells = {{0, 1, 2, -1}, {0, 2, 3, -1}};
  m.cellRegion = {Region::D, Region::D};
  m.cellVolume.resize(2);
  m.cellVolume << 0.5, 0.5;
  m.cellBarycenter.resize(2, 2);
  m.cellBarycenter << 2.0 / 3, 1.0 / 3, 1.0 / 3, 2.0 / 3;
  auto edge = [&](int a, int b, int cell) {
    MeshedDomain::Facet f;
    f.v = {a, b, -1};
    f.tag = Boundary::dDtilde;
    f.cellInner = cell;
    f.cellOuter = -1;
    return f;
  };
  m.facets = {edge(0, 1, 0), edge(1, 2, 0), edge(2, 3, 1), edge(3, 0, 1)};
  return m;
}

// Independent 1D oracle for the radial problem (r gamma(r) u')' = 0 on
// [a, b] with u(a) = ua, u(b) = ub: u(r) = ua + (ub-ua) I(a,r)/I(a,b),
// I by composite Simpson quadrature.
struct RadialOracle {
  double a, b, ua, ub;
  std::function<double(double)> gamma;
  double integralTo(double r) const {
    const int n = 20000;  // even
    double h = (r - a) / n;
    auto f = [&](double s) { return 1.0 / (s * gamma(s)); };
    double s = f(a) + f(r);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
  }
  double value(double r) const {
    return ua + (ub - ua) * integralTo(r) / integralTo(b);
  }
  double derivative(double r) const {
    return (ub - ua) / (r * gamma(r) * integralTo(b));
  }
};

inline std::mt19937_64 rng(std::uint64_t salt) {
  return std::mt19937_64(0xc0ffee123456789ull ^ salt);
}

}  // namespace testsupport

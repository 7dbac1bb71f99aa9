#include <doctest.h>

#include <numbers>

#include "support.hpp"

using namespace calderon;
using namespace testsupport;

namespace {

// One unit right triangle with gamma = 1.
MeshedDomain one_triangle() {
  MeshedDomain m;
  m.dim = 2;
  m.vertices.resize(3, 2);
  m.vertices << 0, 0, 1, 0, 0, 1;
  m.cells = {{0, 1, 2, -1}};
  m.cellRegion = {Region::D};
  m.cellVolume.resize(1);
  m.cellVolume << 0.5;
  m.cellBarycenter.resize(1, 2);
  m.cellBarycenter << 1.0 / 3, 1.0 / 3;
  return m;
}

ConductivityField unit_field(const MeshedDomain& m) {
  ConductivityField g;
  g.mesh = &m;
  g.lambda = 0.4;
  g.E = 100;
  g.values = VecX::Ones(m.numVertices());
  return g;
}

const RegionSystem& omega_system() {
  static RegionSystem sys(mesh2d(), grads2d(), gamma0_2d(),
                          mesh2d().cellsOf({Region::OmegaMinusDtilde,
                                            Region::DtildeMinusDprime,
                                            Region::DprimeMinusD, Region::D}));
  return sys;
}

const RegionSystem& full_system() {
  static std::vector<int> all = [] {
    std::vector<int> v(mesh2d().numCells());
    for (int c = 0; c < mesh2d().numCells(); ++c) v[c] = c;
    return v;
  }();
  static RegionSystem sys(mesh2d(), grads2d(), gamma0_2d(), all);
  return sys;
}

}  // namespace

TEST_CASE("element stiffness of the unit right triangle") {
  MeshedDomain m = one_triangle();
  MeshGradients g(m);
  ConductivityField gamma = unit_field(m);
  RegionSystem sys(m, g, gamma, {0});
  MatX K = MatX(sys.stiffness());
  MatX expected(3, 3);
  expected << 1.0, -0.5, -0.5, -0.5, 0.5, 0.0, -0.5, 0.0, 0.5;
  CHECK((K - expected).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(K.rowwise().sum().cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("quadratic form of the x interpolant equals the gamma integral") {
  const MeshedDomain& m = mesh2d();
  ProfileSpec ramp;
  ramp.profile = Profile::SmoothRamp;
  ConductivityField gamma = make_reference(m, ramp, 0.4, 60.0);
  std::vector<int> cells = m.cellsOf({Region::D, Region::DprimeMinusD});
  RegionSystem sys(m, grads2d(), gamma, cells);
  VecX x(sys.nodes().size());
  for (size_t i = 0; i < sys.nodes().size(); ++i)
    x[i] = m.vertices(sys.nodes()[i], 0);
  double form = x.dot(sys.applyK(x));
  // Independent quadrature of the P1 coefficient: midpoint per cell.
  double integral = 0;
  for (int c : cells) integral += gamma.onCell(c) * m.cellVolume[c];
  CHECK(form == doctest::Approx(integral).epsilon(1e-13));
}

TEST_CASE("doubling gamma doubles the operator") {
  const MeshedDomain& m = mesh2d();
  ConductivityField g2 = gamma0_2d();
  g2.values *= 2.0;
  std::vector<int> cells = m.cellsOf({Region::D});
  RegionSystem a(m, grads2d(), gamma0_2d(), cells);
  RegionSystem b(m, grads2d(), g2, cells);
  auto rnd = rng(7);
  std::normal_distribution<double> N;
  VecX v(a.nodes().size());
  for (auto& x : v) x = N(rnd);
  CHECK(v.dot(b.applyK(v)) == doctest::Approx(2 * v.dot(a.applyK(v))).epsilon(1e-13));
}

TEST_CASE("affine and constant Dirichlet data are reproduced exactly") {
  const MeshedDomain& m = mesh2d();
  const RegionSystem& sys = omega_system();

  SUBCASE("affine") {
    VecX data(m.numVertices());
    for (int v = 0; v < m.numVertices(); ++v)
      data[v] = 2 * m.vertices(v, 0) + 3 * m.vertices(v, 1) - 1;
    FieldSolution u = solve_dirichlet(sys, data);
    double worst = 0;
    for (size_t i = 0; i < sys.nodes().size(); ++i)
      worst = std::max(worst, std::abs(u.local[i] - data[sys.nodes()[i]]));
    CHECK(worst < 1e-10);
    CHECK(u.residualNorm < 1e-10);
  }
  SUBCASE("constant") {
    VecX data = VecX::Constant(m.numVertices(), 3.25);
    FieldSolution u = solve_dirichlet(sys, data);
    CHECK((u.local.array() - 3.25).abs().maxCoeff() < 5e-11);
  }
}

TEST_CASE("radial annulus solve matches the 1D oracle at second order") {
  auto radialGamma = [](double r) { return 1.0 + 0.8 * r; };
  RadialOracle oracle{0.45, 0.65, 0.0, 1.0, radialGamma};

  auto solveOn = [&](const GeometryParams& p) {
    MeshedDomain m = build_domain(p);
    MeshGradients g(m);
    ConductivityField gamma = unit_field(m);
    gamma.lambda = 0.2;
    for (int v = 0; v < m.numVertices(); ++v)
      gamma.values[v] = radialGamma(m.vertices.row(v).norm());
    std::vector<int> cells = m.cellsOf({Region::DtildeMinusDprime});
    RegionSystem sys(m, g, gamma, cells);
    VecX data = VecX::Zero(m.numVertices());
    for (size_t i = 0; i < sys.nodes().size(); ++i) {
      int v = sys.nodes()[i];
      double r = m.vertices.row(v).norm();
      if (std::abs(r - 0.65) < 1e-9) data[v] = 1.0;
    }
    FieldSolution u = solve_dirichlet(sys, data);
    double worst = 0;
    for (size_t i = 0; i < sys.nodes().size(); ++i) {
      double r = m.vertices.row(sys.nodes()[i]).norm();
      worst = std::max(worst, std::abs(u.local[i] - oracle.value(r)));
    }
    return worst;
  };

  GeometryParams coarse = params2d_coarse();
  double errCoarse = solveOn(coarse);
  GeometryParams fine = coarse;
  fine.h /= 2;
  double errFine = solveOn(fine);
  CHECK(errCoarse < 5e-3);
  // O(h^2): halving h should cut the error by nearly four.
  CHECK(errFine < errCoarse / 2.5);
}

TEST_CASE("discrete maximum principle holds with tolerance slack") {
  const MeshedDomain& m = mesh2d();
  const RegionSystem& sys = omega_system();
  auto rnd = rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  VecX data(m.numVertices());
  for (int v = 0; v < m.numVertices(); ++v) data[v] = U(rnd);
  FieldSolution u = solve_dirichlet(sys, data);
  double lo = 1e300, hi = -1e300;
  for (int l : sys.boundaryLocal()) {
    lo = std::min(lo, u.local[l]);
    hi = std::max(hi, u.local[l]);
  }
  double slack = 1e-3 * (hi - lo);
  CHECK(u.local.minCoeff() >= lo - slack);
  CHECK(u.local.maxCoeff() <= hi + slack);
}

TEST_CASE("Green's functions: symmetry, boundary trace, snapping") {
  const MeshedDomain& m = mesh2d();
  const RegionSystem& sys = full_system();
  auto rnd = rng(13);
  std::uniform_int_distribution<int> pick(0, m.numVertices() - 1);

  SUBCASE("source on the outer boundary is rejected") {
    std::vector<int> outer = m.outerBoundaryFacets();
    int v = m.facets[outer[0]].v[0];
    CHECK_THROWS_AS(greens_function_at_vertex(sys, v), ValidationError);
  }
  SUBCASE("symmetry at 20 random node pairs") {
    int done = 0;
    while (done < 20) {
      int a = pick(rnd), b = pick(rnd);
      if (a == b) continue;
      int la = sys.localIndex(a), lb = sys.localIndex(b);
      if (la < 0 || lb < 0 || sys.isBoundaryLocal(la) || sys.isBoundaryLocal(lb))
        continue;
      GreensFunction ga = greens_function_at_vertex(sys, a);
      GreensFunction gb = greens_function_at_vertex(sys, b);
      double scale = std::max({std::abs(ga.values[b]), std::abs(gb.values[a]), 1e-14});
      CHECK(std::abs(ga.values[b] - gb.values[a]) / scale < 1e-8);
      ++done;
    }
  }
  SUBCASE("trace vanishes off Sigma0 and snapping is reported") {
    GreensFunction g = greens_function(sys, mesh2d().markedPoint + Vec3(1e-3, 2e-3, 0));
    CHECK(g.snapDistance > 0);
    CHECK(g.snapDistance < m.params.h);
    for (int f : m.outerBoundaryFacets())
      for (int k = 0; k < m.verticesPerFacet(); ++k)
        REQUIRE(g.values[m.facets[f].v[k]] == 0.0);
    // The trace lives on Sigma0: some interface vertex carries a value.
    double onSigma0 = 0;
    for (int f : m.facetsOf(Boundary::Sigma0))
      for (int k = 0; k < m.verticesPerFacet(); ++k)
        onSigma0 = std::max(onSigma0, std::abs(g.values[m.facets[f].v[k]]));
    CHECK(onSigma0 > 0);
  }
}

TEST_CASE("annulus energy: empty region, monotonicity") {
  const MeshedDomain& m = mesh2d();
  const RegionSystem& sys = full_system();
  GreensFunction g = greens_function(sys, m.markedPoint);
  Vec3 y = Vec3::Zero();
  y.head(2) = m.vertices.row(g.sourceVertex);

  double full = energy_annulus(grads2d(), g.values, y, 4 * m.params.h);
  CHECK(full > 0);
  double prev = full;
  for (double r : {0.1, 0.2, 0.5, 1.0}) {
    double e = energy_annulus(grads2d(), g.values, y, r);
    CHECK(e <= prev * (1 + 1e-12));
    prev = e;
  }
  CHECK(energy_annulus(grads2d(), g.values, y, 5.0) == 0.0);
}

TEST_CASE("Galerkin symmetry and energy minimization") {
  const MeshedDomain& m = mesh2d();
  std::vector<int> cells = m.cellsOf(
      {Region::DtildeMinusDprime, Region::DprimeMinusD, Region::D});
  RegionSystem sys(m, grads2d(), gamma0_2d(), cells);
  auto rnd = rng(17);
  std::normal_distribution<double> N;

  VecX phi = VecX::Zero(m.numVertices()), psi = VecX::Zero(m.numVertices());
  for (int l : sys.boundaryLocal()) {
    phi[sys.nodes()[l]] = N(rnd);
    psi[sys.nodes()[l]] = N(rnd);
  }
  FieldSolution u = solve_dirichlet(sys, phi);
  FieldSolution v = solve_dirichlet(sys, psi);

  SUBCASE("a(u, Ev) = a(v, Eu)") {
    VecX Ku = sys.applyK(u.local), Kv = sys.applyK(v.local);
    double auv = 0, avu = 0;
    for (int l : sys.boundaryLocal()) {
      auv += Ku[l] * psi[sys.nodes()[l]];
      avu += Kv[l] * phi[sys.nodes()[l]];
    }
    CHECK(auv == doctest::Approx(avu).epsilon(1e-10));
  }
  SUBCASE("interior perturbations never decrease the energy") {
    double base = u.local.dot(sys.applyK(u.local));
    for (int trial = 0; trial < 5; ++trial) {
      VecX pert = u.local;
      for (int l : sys.interiorLocal()) pert[l] += 0.01 * N(rnd);
      double e = pert.dot(sys.applyK(pert));
      CHECK(e >= base - 1e-12 * std::abs(base));
    }
  }
}

TEST_CASE("variational co-normal flux") {
  const MeshedDomain& m = mesh2d();
  std::vector<int> cells = m.cellsOf(
      {Region::DtildeMinusDprime, Region::DprimeMinusD, Region::D});
  RegionSystem sys(m, grads2d(), gamma0_2d(), cells);

  SUBCASE("constant solution gives the zero functional") {
    VecX data = VecX::Constant(m.numVertices(), 2.0);
    FieldSolution u = solve_dirichlet(sys, data);
    BoundaryFlux f = conormal_flux(sys, u);
    CHECK(f.coeffs.cwiseAbs().maxCoeff() < 1e-11);
  }
  SUBCASE("total flux vanishes on the closed boundary") {
    VecX data = fourier_on_circle(m, mesh2d().facetVertices(
                                         m.facetsOf(Boundary::dDtilde)),
                                  2, false);
    FieldSolution u = solve_dirichlet(sys, data);
    BoundaryFlux f = conormal_flux(sys, u);
    CHECK(std::abs(f.coeffs.sum()) < 1e-10 * f.coeffs.cwiseAbs().maxCoeff());
  }
  SUBCASE("radial flux density matches the 1D oracle at first order") {
    auto radialGamma = [](double r) { return 1.0 + 0.8 * r; };
    RadialOracle oracle{0.45, 0.65, 0.0, 1.0, radialGamma};
    ConductivityField gamma = unit_field(m);
    for (int v = 0; v < m.numVertices(); ++v)
      gamma.values[v] = radialGamma(m.vertices.row(v).norm());
    std::vector<int> ann = m.cellsOf({Region::DtildeMinusDprime});
    RegionSystem asys(m, grads2d(), gamma, ann);
    VecX data = VecX::Zero(m.numVertices());
    for (size_t i = 0; i < asys.nodes().size(); ++i) {
      int v = asys.nodes()[i];
      if (std::abs(m.vertices.row(v).norm() - 0.65) < 1e-9) data[v] = 1.0;
    }
    FieldSolution u = solve_dirichlet(asys, data);
    BoundaryFlux f = conormal_flux(asys, u);
    // Restrict the functional to the outer circle and project.
    std::vector<int> outerFacets = m.facetsOf(Boundary::dDtilde);
    BoundaryFlux outer;
    std::vector<char> keep(m.numVertices(), 0);
    for (int ff : outerFacets)
      for (int k = 0; k < 2; ++k) keep[m.facets[ff].v[k]] = 1;
    for (size_t i = 0; i < f.nodes.size(); ++i)
      if (keep[f.nodes[i]]) {
        outer.nodes.push_back(f.nodes[i]);
        outer.coeffs.conservativeResize(outer.nodes.size());
        outer.coeffs[outer.nodes.size() - 1] = f.coeffs[i];
      }
    VecX dens = flux_density(m, outerFacets, outer);
    double expected = radialGamma(0.65) * oracle.derivative(0.65);
    std::vector<int> verts = m.facetVertices(outerFacets);
    double worst = 0;
    for (size_t i = 0; i < verts.size(); ++i)
      worst = std::max(worst, std::abs(dens[i] - expected));
    CHECK(worst < 0.05 * std::abs(expected));
  }
}

#include <doctest.h>

#include <numbers>
#include <set>

#include "support.hpp"

using namespace calderon;
using namespace testsupport;

namespace {

// Brute-force membership test for the 2D disk family: is the point in the
// attachment (bulge)?
bool point_in_bulge_2d(const GeometryParams& p, const Eigen::Vector2d& x) {
  double r = x.norm(), th = std::atan2(x.y(), x.x());
  if (th < 0) th += 2 * std::numbers::pi;
  double s0A = p.sigmaCenter - 0.5 * p.sigmaHalfWidth;
  double s0B = p.sigmaCenter + 0.5 * p.sigmaHalfWidth;
  return r > p.omegaRadius && r < p.omegaRadius + p.bulgeThickness && th > s0A &&
         th < s0B;
}

}  // namespace

TEST_CASE("build_domain rejects d0 above rho0") {
  GeometryParams p = params2d();
  p.d0 = p.rho0 + 0.01;
  CHECK_THROWS_AS(build_domain(p), ValidationError);
}

TEST_CASE("build_domain rejects an oversized rho2 naming the constraint") {
  GeometryParams p = params2d();
  p.rho2 = 0.5;  // three nested shells cannot fit
  p.h1 = 0.075;
  try {
    build_domain(p);
    FAIL("expected a geometry error");
  } catch (const ValidationError& e) {
    CHECK(e.kind() == ErrorKind::Geometry);
    CHECK(std::string(e.what()).find("rho2") != std::string::npos);
  }
}

TEST_CASE("2D disk mesh: tags partition and nest strictly") {
  const MeshedDomain& m = mesh2d();
  std::array<int, 5> count{};
  for (Region r : m.cellRegion) count[static_cast<int>(r)]++;
  for (int k = 0; k < 5; ++k) CHECK(count[k] > 0);
  CHECK(count[static_cast<int>(Region::D)] <
        count[static_cast<int>(Region::D)] +
            count[static_cast<int>(Region::DprimeMinusD)]);

  // Region volumes against the parametric areas, O(h) tolerance.
  auto area = [&](std::vector<Region> rs) {
    double s = 0;
    for (int c : m.cellsOf(rs)) s += m.cellVolume[c];
    return s;
  };
  double pi = std::numbers::pi;
  CHECK(area({Region::D}) == doctest::Approx(pi * 0.25 * 0.25).epsilon(0.01));
  double full = area({Region::D, Region::DprimeMinusD, Region::DtildeMinusDprime,
                      Region::OmegaMinusDtilde});
  CHECK(full == doctest::Approx(pi).epsilon(0.01));
}

TEST_CASE("2D disk mesh: interior interfaces have two cells, Sigma0 inside Sigma") {
  const MeshedDomain& m = mesh2d();
  int sigma0 = 0, sigma = 0;
  for (const auto& f : m.facets) {
    if (f.tag == Boundary::dDtilde || f.tag == Boundary::dDprime ||
        f.tag == Boundary::dD || f.tag == Boundary::Sigma0)
      CHECK(f.cellOuter >= 0);
    if (f.tag == Boundary::Sigma0) sigma0++;
    if (f.tag == Boundary::Sigma) sigma++;
  }
  CHECK(sigma0 > 0);
  CHECK(sigma > 0);

  // Sigma0 spans the middle half of Sigma's angular width.
  double lenSigma0 = 0, lenSigmaAll = 0;
  for (int f : m.facetsOf(Boundary::Sigma0)) lenSigma0 += m.facetMeasure(f);
  for (int f : m.facetsOfSigmaAll()) lenSigmaAll += m.facetMeasure(f);
  CHECK(lenSigma0 / lenSigmaAll == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("2D disk mesh: marked ball fits in the attachment (dense sample)") {
  const MeshedDomain& m = mesh2d();
  const GeometryParams& p = m.params;
  double r1 = m.rho1();
  CHECK(r1 > 0);
  // Brute force: sample a dense grid of the ball B_{2 rho1}(Q).
  Eigen::Vector2d q = m.markedPoint.head<2>();
  for (int i = -40; i <= 40; ++i)
    for (int j = -40; j <= 40; ++j) {
      Eigen::Vector2d d(i / 40.0, j / 40.0);
      if (d.norm() > 1.0) continue;
      Eigen::Vector2d x = q + 2 * r1 * 0.999 * d;
      CAPTURE(x.x());
      CAPTURE(x.y());
      REQUIRE(point_in_bulge_2d(p, x));
    }
}

TEST_CASE("2D disk mesh: scaffold distances meet the rho2 contract") {
  const MeshedDomain& m = mesh2d();
  const auto& p = m.params;
  double tol = 1.5 * p.h;
  CHECK(p.scaffoldR[1] - p.scaffoldR[0] > p.rho2 - tol);
  CHECK(p.scaffoldR[2] - p.scaffoldR[1] > p.rho2 - tol);
  CHECK((p.omegaRadius - p.rho2) - p.scaffoldR[2] > p.rho2 - tol);
  CHECK(p.omegaRadius - p.scaffoldR[0] >= p.rho0);
}

TEST_CASE("refinement stability: halving h preserves the invariants") {
  GeometryParams p = params2d_coarse();
  MeshedDomain coarse = build_domain(p);
  p.h /= 2;
  MeshedDomain fine = build_domain(p);
  auto vol = [](const MeshedDomain& m, Region r) {
    double s = 0;
    for (int c : m.cellsOf({r})) s += m.cellVolume[c];
    return s;
  };
  for (Region r : {Region::D, Region::DprimeMinusD, Region::DtildeMinusDprime,
                   Region::OmegaMinusDtilde, Region::A}) {
    double a = vol(coarse, r), b = vol(fine, r);
    CHECK(std::abs(a - b) / b < 4 * p.h);  // O(h) volume change
  }
}

TEST_CASE("erode: both degenerate and regular behavior") {
  const MeshedDomain& m = mesh2d();
  std::vector<int> shell = shell_outside_Dprime(m);

  SUBCASE("h at region scale empties the set") {
    CHECK_THROWS_AS(erode(m, m.cellsOf({Region::D}), 1.0), ValidationError);
  }
  SUBCASE("vanishing h keeps every cell (barycenters are interior)") {
    std::vector<int> d = m.cellsOf({Region::D});
    std::vector<int> e = erode(m, d, 1e-9);
    CHECK(e.size() == d.size());
    // A depth below one cell layer already removes the rim.
    std::vector<int> e2 = erode(m, d, m.params.h / 2);
    CHECK(e2.size() < d.size());
    CHECK(e2.size() > d.size() / 2);
  }
  SUBCASE("eroded shell is connected and contains the ball at Q") {
    std::vector<int> e = erode(m, shell, m.params.h1);
    CHECK(cells_connected(m, e));
    REQUIRE(m.rho1() <= m.params.h1 + 1.0);  // sanity on the setup
    std::set<int> inE(e.begin(), e.end());
    int ballCells = 0, ballInE = 0;
    for (int c = 0; c < m.numCells(); ++c) {
      Vec3 b = Vec3::Zero();
      b.head(2) = m.cellBarycenter.row(c);
      if ((b - m.markedPoint).norm() < m.rho1()) {
        ballCells++;
        if (inE.count(c)) ballInE++;
      }
    }
    CHECK(ballCells > 0);
    CHECK(ballInE == ballCells);
  }
}

TEST_CASE("sample_surface: weights reproduce surface measures") {
  const MeshedDomain& m = mesh2d();

  SUBCASE("dDtilde polygon perimeter, one point per facet") {
    auto facets = m.facetsOf(Boundary::dDtilde);
    SurfaceQuadrature q = sample_surface(m, Boundary::dDtilde, 1.0);
    CHECK(q.points.rows() == static_cast<int>(facets.size()));
    // Oracle: perimeter of the regular polygon inscribed in the circle.
    double perim = 0;
    for (int f : facets) perim += m.facetMeasure(f);
    CHECK(std::abs(q.weights.sum() - perim) <= 1e-10 * perim);
    // The polygon approximates 2 pi r at second order.
    double r = m.params.scaffoldR[2];
    CHECK(q.weights.sum() ==
          doctest::Approx(2 * std::numbers::pi * r).epsilon(1e-4));
    // Outward normals: aligned with the radial direction.
    for (int i = 0; i < q.points.rows(); ++i) {
      Eigen::Vector2d x = q.points.row(i), n = q.normals.row(i);
      CHECK(x.normalized().dot(n) > 0.99);
    }
  }
  SUBCASE("refined rule doubles points and keeps the sum") {
    SurfaceQuadrature q1 = sample_surface(m, Boundary::dDtilde, 1.0);
    double len = m.facetMeasure(m.facetsOf(Boundary::dDtilde)[0]);
    SurfaceQuadrature q2 = sample_surface(m, Boundary::dDtilde, 0.6 * len);
    CHECK(q2.points.rows() == 2 * q1.points.rows());
    CHECK(q2.weights.sum() == doctest::Approx(q1.weights.sum()).epsilon(1e-12));
  }
  SUBCASE("unit square boundary sums to 4 exactly") {
    MeshedDomain sq = unit_square_mesh();
    SurfaceQuadrature q = sample_surface(sq, Boundary::dDtilde, 10.0);
    CHECK(q.points.rows() == 4);
    CHECK(std::abs(q.weights.sum() - 4.0) <= 1e-12 * 4.0);
  }
}

TEST_CASE("annulus-sector family builds with consistent tags") {
  GeometryParams p;
  p.family = Family::AnnulusSector;
  p.annulusInnerRadius = 0.4;
  p.omegaRadius = 1.9;
  p.scaffoldR = {0.09, 0.27, 0.45};
  p.rho0 = 0.17;
  p.d0 = 0.15;
  p.rho2 = 0.16;
  p.h1 = 0.078;
  p.h = 0.018;
  p.bulgeThickness = 0.35;
  MeshedDomain m = build_domain(p);
  std::array<int, 5> count{};
  for (Region r : m.cellRegion) count[static_cast<int>(r)]++;
  for (int k = 0; k < 5; ++k) CHECK(count[k] > 0);
  CHECK(!m.facetsOf(Boundary::Sigma0).empty());
}

TEST_CASE("3D box: every region and boundary tag is populated") {
  GeometryParams p;
  p.dimension = 3;
  p.family = Family::Box;
  p.boxSize = 1.0;
  p.scaffoldR = {0.1, 0.21, 0.32};
  p.rho0 = 0.18;
  p.d0 = 0.18;
  p.rho2 = 0.088;
  p.h1 = 0.0438;
  p.bulgeThickness = 0.42;
  p.sigmaHalfWidth = 1.0;
  // rho1 derived from the cap: (0.375*0.42 - 2h)/2; keep h under every /4 bound.
  p.h = 0.0105;
  MeshedDomain m = build_domain(p);
  std::array<int, 5> rcount{};
  for (Region r : m.cellRegion) rcount[static_cast<int>(r)]++;
  for (int k = 0; k < 5; ++k) CHECK(rcount[k] > 0);
  std::array<int, 6> bcount{};
  for (const auto& f : m.facets) bcount[static_cast<int>(f.tag)]++;
  for (int k = 0; k < 6; ++k) {
    CAPTURE(k);
    CHECK(bcount[k] > 0);
  }
  // D is a cube of side 0.2 up to the lattice snap.
  double dvol = 0;
  for (int c : m.cellsOf({Region::D})) dvol += m.cellVolume[c];
  CHECK(dvol == doctest::Approx(0.2 * 0.2 * 0.2).epsilon(0.2));
}

TEST_CASE("mesh dump / load round-trip is exact") {
  GeometryParams p = params2d_coarse();
  MeshedDomain m = build_domain(p);
  std::stringstream ss;
  dump_mesh(m, ss);
  MeshedDomain n = load_mesh(ss);
  REQUIRE(n.numVertices() == m.numVertices());
  REQUIRE(n.numCells() == m.numCells());
  CHECK((n.vertices - m.vertices).cwiseAbs().maxCoeff() == 0.0);
  CHECK(n.cells == m.cells);
  for (int c = 0; c < m.numCells(); ++c) CHECK(n.cellRegion[c] == m.cellRegion[c]);
  REQUIRE(n.facets.size() == m.facets.size());
  for (size_t f = 0; f < m.facets.size(); ++f) {
    CHECK(n.facets[f].v == m.facets[f].v);
    CHECK(n.facets[f].tag == m.facets[f].tag);
  }
  CHECK(n.rho1() == m.rho1());
}

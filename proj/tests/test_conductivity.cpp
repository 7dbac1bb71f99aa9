#include <doctest.h>

#include "support.hpp"

using namespace calderon;
using namespace testsupport;

TEST_CASE("make_reference: constant and ramp profiles") {
  const MeshedDomain& m = mesh2d();

  SUBCASE("constant one is valid for any lambda below one") {
    ConductivityField g = make_reference(m, {}, 0.4, 60.0);
    CHECK(g.values.minCoeff() == 1.0);
    CHECK(g.values.maxCoeff() == 1.0);
    CHECK(validate(g).pass());
  }
  SUBCASE("smooth ramp stays inside the ellipticity interval") {
    ProfileSpec spec;
    spec.profile = Profile::SmoothRamp;
    spec.rampLow = 1.0;
    spec.rampHigh = 2.0;
    ConductivityField g = make_reference(m, spec, 0.4, 60.0);
    CHECK(g.values.minCoeff() > 0.4);
    CHECK(g.values.maxCoeff() < 1.0 / 0.4);
    CHECK(g.values.maxCoeff() <= 2.0);
  }
  SUBCASE("constant at the upper ellipticity bound is rejected") {
    ProfileSpec spec;
    spec.value = 1.0 / 0.4;  // equals lambda^{-1}, strict bound fails
    CHECK_THROWS_AS(make_reference(m, spec, 0.4, 60.0), ValidationError);
  }
}

TEST_CASE("perturb_in_D: support, sup gap, bit-exactness") {
  const MeshedDomain& m = mesh2d();
  const ConductivityField& g0 = gamma0_2d();

  SUBCASE("zero amplitude returns gamma0 exactly") {
    PerturbResult r = perturb_in_D(g0, default_bump(0.0));
    CHECK(r.supGap == 0.0);
    CHECK((r.gamma.values - g0.values).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("unit-peak bump gives sup gap equal to the amplitude") {
    BumpSpec b = default_bump(0.3);
    // Center the bump on a mesh vertex so the peak is attained exactly.
    int v = nearest_vertex(m, Eigen::Vector2d(0, 0));
    b.center.head<2>() = m.vertices.row(v);
    PerturbResult r = perturb_in_D(g0, b);
    CHECK(r.supGap == doctest::Approx(0.3).epsilon(1e-12));
    // Bit-exact outside closure(D): vertices touched by any non-D cell.
    std::vector<char> outside(m.numVertices(), 0);
    for (int c = 0; c < m.numCells(); ++c)
      if (m.cellRegion[c] != Region::D)
        for (int k = 0; k <= m.dim; ++k) outside[m.cells[c][k]] = 1;
    for (int vv = 0; vv < m.numVertices(); ++vv)
      if (outside[vv]) REQUIRE(r.gamma.values[vv] == g0.values[vv]);
  }
  SUBCASE("amplitude breaking ellipticity is rejected") {
    CHECK_THROWS_AS(perturb_in_D(g0, default_bump(1.6)), ValidationError);
    CHECK_THROWS_AS(perturb_in_D(g0, default_bump(-0.7)), ValidationError);
  }
  SUBCASE("support reaching outside D is rejected") {
    BumpSpec b = default_bump(0.1);
    b.width = 0.4;  // larger than the D radius 0.25
    CHECK_THROWS_AS(perturb_in_D(g0, b), ValidationError);
  }
  SUBCASE("mollified indicator shape is also admissible") {
    BumpSpec b = default_bump(0.2);
    b.shape = BumpShape::MollifiedIndicator;
    PerturbResult r = perturb_in_D(g0, b);
    CHECK(r.supGap == doctest::Approx(0.2).epsilon(1e-12));
  }
}

TEST_CASE("validate: locates offending vertices") {
  const MeshedDomain& m = mesh2d();

  SUBCASE("sawtooth violates the second-difference surrogate") {
    ConductivityField g = gamma0_2d();
    g.E = 10.0;
    // Alternate vertex values: first quotients ~ 2*amp/h, second ~ 4*amp/h^2.
    for (int v = 0; v < m.numVertices(); ++v)
      g.values[v] = 1.0 + ((v % 2) ? 0.05 : -0.05);
    ConductivityReport rep = validate(g);
    CHECK(!rep.pass());
    bool foundSecond = false;
    for (const auto& c : rep.checks)
      if (c.name == "W2inf-surrogate" && !c.pass) {
        foundSecond = true;
        CHECK(c.worstVertex >= 0);
        CHECK(c.worstValue > g.E);
      }
    CHECK(foundSecond);
  }
  SUBCASE("a single vertex at lambda fails ellipticity") {
    ConductivityField g = gamma0_2d();
    g.values[42] = g.lambda;
    ConductivityReport rep = validate(g);
    bool ell = false;
    for (const auto& c : rep.checks)
      if (c.name == "ellipticity") {
        ell = true;
        CHECK(!c.pass);
        CHECK(c.worstVertex == 42);
      }
    CHECK(ell);
  }
  SUBCASE("validate is idempotent and side-effect free") {
    ConductivityField g = gamma0_2d();
    VecX before = g.values;
    ConductivityReport r1 = validate(g);
    ConductivityReport r2 = validate(g);
    CHECK((g.values - before).cwiseAbs().maxCoeff() == 0.0);
    CHECK(r1.pass() == r2.pass());
    CHECK(r1.measuredSecond == r2.measuredSecond);
  }
}

TEST_CASE("field dump / load round-trip") {
  const ConductivityField& g0 = gamma0_2d();
  std::stringstream ss;
  dump_field_values(g0.values, g0.lambda, g0.E, g0.E1, ss);
  FieldFile f = load_field_values(ss);
  CHECK(f.lambda == g0.lambda);
  CHECK((f.values - g0.values).cwiseAbs().maxCoeff() == 0.0);
}

#include <doctest.h>

#include <fstream>
#include <numbers>

#include "support.hpp"

using namespace calderon;
using namespace testsupport;

namespace {

// Coarser shared pipeline for the sweep-level tests.
const MeshedDomain& meshC() {
  static MeshedDomain m = build_domain(params2d_coarse());
  return m;
}
const MeshGradients& gradsC() {
  static MeshGradients g(meshC());
  return g;
}
const ConductivityField& gamma0C() {
  static ConductivityField g = make_reference(meshC(), {}, 0.4, 60.0);
  return g;
}

}  // namespace

TEST_CASE("nodal quadrature reproduces the interface measure") {
  NodalQuadrature q = nodal_quadrature(mesh2d(), Boundary::dDtilde);
  double perim = 0;
  for (int f : mesh2d().facetsOf(Boundary::dDtilde)) perim += mesh2d().facetMeasure(f);
  CHECK(q.weights.sum() == doctest::Approx(perim).epsilon(1e-12));
  CHECK(q.verts.size() == mesh2d().facetsOf(Boundary::dDtilde).size());
  for (Eigen::Index i = 0; i < q.normals.rows(); ++i)
    CHECK(q.normals.row(i).norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("interpolation LP: constants and synthetic families") {
  SUBCASE("proportional norms make every eta feasible with the same C") {
    // Constant members: norms are the square roots of the region measures.
    std::vector<double> a(5, 0.2), m(5, 0.8), b(5, 1.0);
    PropagationFit fit = fit_interpolation_lp(a, m, b);
    CHECK(fit.margin >= -1e-12);
    CHECK(fit.eta > 0);
    CHECK(fit.eta < 1);
    // C = m / (a^eta b^(1-eta)) exactly.
    double expect = 0.8 / (std::pow(0.2, fit.eta) * std::pow(1.0, 1 - fit.eta));
    CHECK(fit.C == doctest::Approx(expect).epsilon(1e-9));
  }
  SUBCASE("the minimax eta beats the endpoints") {
    std::vector<double> a = {1e-4, 1e-2, 1e-3}, m = {0.05, 0.4, 0.1},
                        b = {1.0, 1.2, 0.9};
    PropagationFit fit = fit_interpolation_lp(a, m, b);
    auto objective = [&](double eta) {
      double worst = -1e300;
      for (size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::log(m[i]) - eta * std::log(a[i]) -
                                    (1 - eta) * std::log(b[i]));
      return worst;
    };
    CHECK(fit.objective <= objective(0.05) + 1e-9);
    CHECK(fit.objective <= objective(0.95) + 1e-9);
    CHECK(fit.margin >= -1e-12);
  }
}

TEST_CASE("fit_propagation produces a feasible pair on the real geometry") {
  PropagationFit fit = fit_propagation(meshC(), gradsC(), gamma0C(), 12, 5);
  CHECK(fit.eta > 0);
  CHECK(fit.eta < 1);
  CHECK(fit.margin >= -1e-12);
  CHECK(fit.C > 0);
  REQUIRE(fit.normBall.size() == 12);
  // Point-load members are shielded: the ball norm is far below the shell norm.
  bool shielded = false;
  for (size_t i = 0; i < fit.normBall.size(); ++i)
    if (fit.normBall[i] < 1e-2 * fit.normShell[i]) shielded = true;
  CHECK(shielded);
}

TEST_CASE("reconstruction: equal fields and conservation consistency") {
  static BoundaryOperator full0 = assemble_full_dtn(meshC(), gradsC(), gamma0C());

  SUBCASE("gamma1 = gamma2 gives zero on both routes") {
    SKernelEngine e(meshC(), gradsC(), gamma0C(), gamma0C());
    VecX eta1 = fourier_on_circle(meshC(), full0.dofs, 1, false);
    VecX eta2 = fourier_on_circle(meshC(), full0.dofs, 2, true);
    ReconstructionResult r =
        reconstruct_gap_via_S(meshC(), gradsC(), gamma0C(), gamma0C(), eta1, eta2,
                              full0, full0, e, default_fd_step(meshC().params));
    CHECK(std::abs(r.direct) < 1e-12);
    CHECK(std::abs(r.viaS) < 1e-12);
  }
  SUBCASE("constant eta2: direct vanishes, the I-terms cancel") {
    ConductivityField g1 = perturb_in_D(gamma0C(), default_bump(0.2)).gamma;
    static BoundaryOperator full1 = assemble_full_dtn(meshC(), gradsC(), g1);
    SKernelEngine e(meshC(), gradsC(), gamma0C(), g1);
    VecX eta1 = fourier_on_circle(meshC(), full0.dofs, 1, false);
    VecX eta2 = VecX::Zero(meshC().numVertices());
    for (int v : full0.dofs) eta2[v] = 1.0;
    ReconstructionResult r =
        reconstruct_gap_via_S(meshC(), gradsC(), gamma0C(), g1, eta1, eta2, full0,
                              full1, e, default_fd_step(meshC().params));
    double scaleDirect = full0.op.cwiseAbs().maxCoeff();
    CHECK(std::abs(r.direct) < 1e-9 * scaleDirect);
    double scaleI = std::max({std::abs(r.I2), std::abs(r.I4), 1e-14});
    CHECK(std::abs(r.viaS) <= 0.05 * scaleI);
  }
}

TEST_CASE("stability sweep rejections") {
  SweepOptions sw;
  sw.bump = default_bump(0.0);
  sw.randomCenter = false;
  sw.withReconstruction = false;

  SUBCASE("fewer than four amplitudes") {
    sw.K = 3;
    sw.t0 = 0.4;
    CHECK_THROWS_AS(stability_sweep(meshC(), gradsC(), gamma0C(), sw),
                    ValidationError);
  }
  SUBCASE("all-zero amplitudes are degenerate") {
    sw.K = 4;
    sw.t0 = 0.0;
    CHECK_THROWS_AS(stability_sweep(meshC(), gradsC(), gamma0C(), sw),
                    ValidationError);
  }
}

TEST_CASE("trimmed stability sweep: shapes of the fitted report") {
  SweepOptions sw;
  sw.t0 = 0.4;
  sw.K = 4;
  sw.bump = default_bump(0.0);
  sw.randomCenter = false;
  sw.withReconstruction = false;
  sw.propagationFamily = 10;
  sw.seed = 3;
  ExperimentReport rep = stability_sweep(meshC(), gradsC(), gamma0C(), sw);

  REQUIRE(rep.rows.size() == 4);
  CHECK(rep.epsilonStrictlyDecreasing);
  for (const auto& r : rep.rows) {
    CHECK(r.epsilon > 0);
    CHECK(r.fullGap > 0);
    CHECK(r.supGap <= rep.lambdaInvCap);
    CHECK(r.supGap == doctest::Approx(r.t).epsilon(1e-9));
  }
  CHECK(rep.fittedBeta > 0);
  CHECK(rep.betaR2 > 0.9);
  CHECK(rep.fittedDelta > 0);
  CHECK(rep.fittedDelta <= 1.0);
  CHECK(rep.deltaC >= 1.0);
  CHECK(rep.fittedEta > 0);
  CHECK(rep.fittedEta < 1);
  // Fitted-constant margins: every row satisfies its bound.
  for (const auto& r : rep.rows) {
    CHECK(r.fullGap <= rep.betaC * std::pow(r.epsilon, rep.fittedBeta) * (1 + 1e-9));
    CHECK(r.supGap <=
          rep.deltaC * std::pow(std::abs(std::log(r.epsilon)), -rep.fittedDelta) *
              (1 + 1e-9));
  }
}

TEST_CASE("experiment CSV format") {
  ExperimentReport rep;
  SweepRow r;
  r.t = 0.4;
  r.epsilon = 1e-3;
  r.fullGap = 2e-3;
  r.supGap = 0.4;
  rep.rows.push_back(r);
  rep.fittedBeta = 0.9;
  std::string path = "/tmp/calderon_test_experiment.csv";
  write_experiment_csv(rep, path);
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  CHECK(line == "t,epsilon,fullGap,supGap");
  std::getline(is, line);
  CHECK(line.substr(0, 4) == "0.4,");
  bool summary = false;
  while (std::getline(is, line))
    if (line == "# summary") summary = true;
  CHECK(summary);
}

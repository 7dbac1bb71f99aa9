#include "calderon/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace calderon {

namespace {

[[noreturn]] void fail(const std::string& key, const std::string& msg) {
  throw ValidationError(ErrorKind::Solver, key, msg);
}

std::vector<int> cells_in_ball(const MeshedDomain& mesh, const Vec3& center,
                               double radius) {
  std::vector<int> out;
  for (int c = 0; c < mesh.numCells(); ++c) {
    Vec3 b = Vec3::Zero();
    b.head(mesh.dim) = mesh.cellBarycenter.row(c);
    if ((b - center).norm() < radius) out.push_back(c);
  }
  return out;
}

}  // namespace

double default_fd_step(const GeometryParams& p) {
  double want = std::max(4 * p.h, p.rho2 / 8);
  return std::clamp(want, 2 * p.h, p.rho2 / 4);
}

NodalQuadrature nodal_quadrature(const MeshedDomain& mesh, Boundary tag) {
  std::vector<int> facets = mesh.facetsOf(tag);
  if (facets.empty()) fail("quadrature", "tag has no facets");
  std::vector<int> verts = mesh.facetVertices(facets);
  std::unordered_map<int, int> g2l;
  for (size_t i = 0; i < verts.size(); ++i) g2l[verts[i]] = static_cast<int>(i);

  NodalQuadrature q;
  q.verts = verts;
  q.weights = VecX::Zero(verts.size());
  MatX normalSum = MatX::Zero(verts.size(), mesh.dim);
  for (int f : facets) {
    double meas = mesh.facetMeasure(f);
    Vec3 n = mesh.facetNormal(f);
    for (int k = 0; k < mesh.verticesPerFacet(); ++k) {
      int l = g2l[mesh.facets[f].v[k]];
      q.weights[l] += meas / mesh.verticesPerFacet();
      normalSum.row(l) += meas * n.head(mesh.dim).transpose();
    }
  }
  q.normals.resize(verts.size(), mesh.dim);
  for (Eigen::Index i = 0; i < normalSum.rows(); ++i) {
    double len = normalSum.row(i).norm();
    if (len <= 0) fail("quadrature", "degenerate vertex normal");
    q.normals.row(i) = normalSum.row(i) / len;
  }
  return q;
}

VecX fourier_on_circle(const MeshedDomain& mesh, const std::vector<int>& verts,
                       int k, bool sine) {
  VecX out = VecX::Zero(mesh.numVertices());
  for (int v : verts) {
    double th = std::atan2(mesh.vertices(v, 1), mesh.vertices(v, 0));
    out[v] = sine ? std::sin(k * th) : std::cos(k * th);
  }
  return out;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  LineFit f;
  if (n < 2) return f;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  double denom = n * sxx - sx * sx;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  double ssRes = 0, ssTot = 0, ybar = sy / n;
  for (int i = 0; i < n; ++i) {
    double e = y[i] - (f.intercept + f.slope * x[i]);
    ssRes += e * e;
    ssTot += (y[i] - ybar) * (y[i] - ybar);
  }
  f.residual = std::sqrt(ssRes / n);
  f.r2 = ssTot > 0 ? 1.0 - ssRes / ssTot : 1.0;
  return f;
}

ReconstructionResult reconstruct_gap_via_S(
    const MeshedDomain& mesh, const MeshGradients& grads,
    const ConductivityField& gamma1, const ConductivityField& gamma2,
    const VecX& eta1Global, const VecX& eta2Global, const BoundaryOperator& full1,
    const BoundaryOperator& full2, SKernelEngine& engine, double hFd,
    const SolverOptions& opts) {
  if (full1.dofs != full2.dofs)
    fail("reconstruct", "the two full maps use different dof sets");
  const auto& dofs = full1.dofs;
  const int n = static_cast<int>(dofs.size());

  ReconstructionResult out;
  // Direct Galerkin pairing.
  VecX e1(n), e2(n);
  for (int i = 0; i < n; ++i) {
    e1[i] = eta1Global[dofs[i]];
    e2[i] = eta2Global[dofs[i]];
  }
  MatX diff = full1.op - full2.op;
  out.direct = e2.dot(diff * e1);

  // Solutions and flux densities on Dtilde.
  std::vector<int> dtCells = mesh.cellsOf(
      {Region::DtildeMinusDprime, Region::DprimeMinusD, Region::D});
  RegionSystem sys1(mesh, grads, gamma1, dtCells, opts);
  RegionSystem sys2(mesh, grads, gamma2, dtCells, opts);
  FieldSolution v1 = solve_dirichlet(sys1, eta1Global);
  FieldSolution v2 = solve_dirichlet(sys2, eta2Global);
  std::vector<int> dtFacets = mesh.facetsOf(Boundary::dDtilde);
  std::vector<int> faceVerts = mesh.facetVertices(dtFacets);
  VecX q1 = flux_density(mesh, dtFacets, conormal_flux(sys1, v1));
  VecX q2 = flux_density(mesh, dtFacets, conormal_flux(sys2, v2));
  std::unordered_map<int, int> densityIndex;
  for (size_t i = 0; i < faceVerts.size(); ++i)
    densityIndex[faceVerts[i]] = static_cast<int>(i);

  // Nodal quadrature with normal stencils per dof vertex.
  NodalQuadrature quad = nodal_quadrature(mesh, Boundary::dDtilde);
  std::unordered_map<int, int> quadIndex;
  for (size_t i = 0; i < quad.verts.size(); ++i)
    quadIndex[quad.verts[i]] = static_cast<int>(i);

  std::vector<std::pair<int, double>> loadAq, loadAv, loadBq, loadBv;
  for (int j = 0; j < n; ++j) {
    int v = dofs[j];
    int qi = quadIndex.at(v);
    double W = quad.weights[qi];
    Vec3 x = Vec3::Zero(), nu = Vec3::Zero();
    x.head(mesh.dim) = mesh.vertices.row(v);
    nu.head(mesh.dim) = quad.normals.row(qi);
    NormalStencil st = engine.stencil(x, nu, hFd);
    if (!st.valid)
      fail("reconstruct", "normal stencil invalid at dof " + std::to_string(j));
    out.maxTangentialError = std::max(out.maxTangentialError, st.tangentialError);

    double dens1 = q1[densityIndex.at(v)];
    double dens2 = q2[densityIndex.at(v)];
    double g0 = gamma1.at(v);  // gamma1 = gamma2 = gamma0 on dDtilde
    double val1 = eta1Global[v], val2 = eta2Global[v];

    loadAq.push_back({v, dens1 * W});
    loadBq.push_back({v, dens2 * W});
    for (int a = 0; a < 3; ++a) {
      loadAv.push_back({st.verts[a], g0 * val1 * W * st.deriv[a]});
      loadBv.push_back({st.verts[a], g0 * val2 * W * st.deriv[a]});
    }
  }

  VecX Aq = engine.green_combination(0, loadAq);
  VecX Av = engine.green_combination(0, loadAv);
  VecX Bq = engine.green_combination(1, loadBq);
  VecX Bv = engine.green_combination(1, loadBv);

  out.I1 = engine.contract(Aq, Bq);
  out.I2 = engine.contract(Aq, Bv);
  out.I3 = engine.contract(Av, Bq);
  out.I4 = engine.contract(Av, Bv);
  out.viaS = out.I1 - out.I2 - out.I3 + out.I4;
  out.absGap = std::abs(out.direct - out.viaS);
  out.relGap = out.absGap / std::max(std::abs(out.direct), 1e-300);
  return out;
}

PropagationFit fit_propagation(const MeshedDomain& mesh, const MeshGradients& grads,
                               const ConductivityField& gamma0, int familySize,
                               std::uint64_t seed, const SolverOptions& opts) {
  if (familySize < 2) fail("propagation.family", "family size must be >= 2");
  std::mt19937_64 rng(seed ^ 0x70726f7061676174ull);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);

  std::vector<int> allCells(mesh.numCells());
  for (int c = 0; c < mesh.numCells(); ++c) allCells[c] = c;
  RegionSystem sys(mesh, grads, gamma0, allCells, opts);

  // Interior vertices of D for the point loads.
  std::vector<int> dCells = mesh.cellsOf({Region::D});
  std::vector<char> inD(mesh.numVertices(), 0), outD(mesh.numVertices(), 0);
  for (int c = 0; c < mesh.numCells(); ++c) {
    bool d = mesh.cellRegion[c] == Region::D;
    for (int k = 0; k <= mesh.dim; ++k)
      (d ? inD : outD)[mesh.cells[c][k]] = 1;
  }
  std::vector<int> dInterior;
  for (int v = 0; v < mesh.numVertices(); ++v)
    if (inD[v] && !outD[v]) dInterior.push_back(v);
  if (dInterior.empty()) fail("propagation", "D has no interior vertices");

  // Norm regions.
  std::vector<int> shell = shell_outside_Dprime(mesh);
  std::vector<int> eroded = erode(mesh, shell, mesh.params.h1);
  std::vector<int> ball = cells_in_ball(mesh, mesh.markedPoint, mesh.rho1());
  if (ball.empty()) fail("propagation", "the ball at Q contains no cells");

  PropagationFit fit;
  std::uniform_int_distribution<int> pick(0, static_cast<int>(dInterior.size()) - 1);
  bool anyNonconstant = false;
  for (int m = 0; m < familySize; ++m) {
    VecX field;
    if (m % 2 == 0) {
      // Random cubic polynomial Dirichlet data on the outer boundary.
      double c[10];
      for (double& x : c) x = unif(rng);
      VecX data = VecX::Zero(mesh.numVertices());
      for (int v = 0; v < mesh.numVertices(); ++v) {
        double x = mesh.vertices(v, 0), y = mesh.vertices(v, 1);
        double z = mesh.dim == 3 ? mesh.vertices(v, 2) : 0.0;
        data[v] = c[0] + c[1] * x + c[2] * y + c[3] * z + c[4] * x * y +
                  c[5] * y * z + c[6] * x * z + c[7] * x * x * x +
                  c[8] * y * y * y + c[9] * x * y * z;
      }
      field = solve_dirichlet(sys, data).scatter(mesh.numVertices());
    } else {
      // Random point loads inside D, occasionally a +/- pair.
      VecX load = VecX::Zero(sys.nodes().size());
      int nLoads = 1 + (m % 3);
      for (int l = 0; l < nLoads; ++l) {
        int v = dInterior[pick(rng)];
        double sign = (m % 4 == 3 && l % 2 == 1) ? -1.0 : 1.0;
        load[sys.localIndex(v)] += sign * (0.5 + std::abs(unif(rng)));
      }
      VecX sol = sys.solveLoadLocal(load, nullptr);
      field = VecX::Zero(mesh.numVertices());
      const auto& nodes = sys.nodes();
      for (size_t i = 0; i < nodes.size(); ++i) field[nodes[i]] = sol[i];
    }
    double a = l2_norm_on_cells(mesh, ball, field);
    double mm = l2_norm_on_cells(mesh, eroded, field);
    double b = l2_norm_on_cells(mesh, shell, field);
    if (a <= 0 || mm <= 0 || b <= 0)
      fail("propagation", "a family member vanishes on a norm region");
    double span = field.maxCoeff() - field.minCoeff();
    if (span > 1e-12 * std::abs(field.maxCoeff())) anyNonconstant = true;
    fit.normBall.push_back(a);
    fit.normEroded.push_back(mm);
    fit.normShell.push_back(b);
  }
  if (!anyNonconstant)
    fail("propagation.family", "degenerate family: all members constant");

  PropagationFit lp =
      fit_interpolation_lp(fit.normBall, fit.normEroded, fit.normShell);
  lp.normBall = std::move(fit.normBall);
  lp.normEroded = std::move(fit.normEroded);
  lp.normShell = std::move(fit.normShell);
  return lp;
}

PropagationFit fit_interpolation_lp(const std::vector<double>& normBall,
                                    const std::vector<double>& normEroded,
                                    const std::vector<double>& normShell) {
  if (normBall.size() != normEroded.size() || normBall.size() != normShell.size() ||
      normBall.empty())
    fail("propagation", "norm triple lists must be nonempty and equally sized");
  auto objective = [&](double eta) {
    double worst = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < normBall.size(); ++i) {
      double v = std::log(normEroded[i]) - eta * std::log(normBall[i]) -
                 (1 - eta) * std::log(normShell[i]);
      worst = std::max(worst, v);
    }
    return worst;
  };
  double bestEta = 0.5, bestObj = objective(0.5);
  for (int i = 1; i <= 999; ++i) {
    double eta = i / 1000.0;
    double obj = objective(eta);
    if (obj < bestObj) {
      bestObj = obj;
      bestEta = eta;
    }
  }
  // Local golden-section refinement (objective is convex in eta).
  double lo = std::max(1e-3, bestEta - 2e-3), hi = std::min(0.999, bestEta + 2e-3);
  for (int it = 0; it < 40; ++it) {
    double m1 = lo + 0.382 * (hi - lo), m2 = lo + 0.618 * (hi - lo);
    if (objective(m1) < objective(m2)) hi = m2;
    else lo = m1;
  }
  bestEta = 0.5 * (lo + hi);
  bestObj = objective(bestEta);

  PropagationFit fit;
  fit.eta = bestEta;
  fit.C = std::exp(bestObj);
  fit.objective = bestObj;
  double minSlack = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < normBall.size(); ++i) {
    double bound = bestObj + bestEta * std::log(normBall[i]) +
                   (1 - bestEta) * std::log(normShell[i]);
    minSlack = std::min(minSlack, bound - std::log(normEroded[i]));
  }
  fit.margin = minSlack;
  return fit;
}

CascadeCheck cascade_smallness(const MeshedDomain& mesh, const MeshGradients& grads,
                               SKernelEngine& engine, const PropagationFit& fit,
                               double epsilon, int vw) {
  (void)grads;
  CascadeCheck out;
  out.epsilon = epsilon;
  VecX sField = engine.s_field_in_first(vw);
  std::vector<int> shell = shell_outside_Dprime(mesh);
  std::vector<int> eroded = erode(mesh, shell, mesh.params.h1);
  std::vector<int> ball = cells_in_ball(mesh, mesh.markedPoint, mesh.rho1());
  out.normBall = l2_norm_on_cells(mesh, ball, sField);
  out.normShell = l2_norm_on_cells(mesh, shell, sField);
  out.measured = l2_norm_on_cells(mesh, eroded, sField);
  out.predicted = fit.C * std::pow(out.normBall, fit.eta) *
                  std::pow(out.normShell, 1 - fit.eta);
  out.cPrime = epsilon > 0 ? out.normBall / epsilon : 0;
  out.holds = out.measured <= out.predicted * (1 + 1e-12);
  return out;
}

ExperimentReport stability_sweep(const MeshedDomain& mesh, const MeshGradients& grads,
                                 const ConductivityField& gamma0,
                                 const SweepOptions& sweep,
                                 const SolverOptions& opts) {
  if (sweep.K < 4) fail("sweep.K", "need at least 4 dyadic amplitudes");
  ExperimentReport rep;
  rep.lambdaInvCap = 1.0 / gamma0.lambda;
  rep.epsilonFloor = 1e3 * opts.tol;

  // Fixed bump placement for the whole sweep.
  BumpSpec bump = sweep.bump;
  if (sweep.randomCenter) {
    std::mt19937_64 rng(sweep.seed ^ 0x73776565702d6273ull);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    // Center of mass of D plus a small seeded offset keeping the support
    // strictly inside.
    Vec3 cm = Vec3::Zero();
    double vol = 0;
    for (int c : mesh.cellsOf({Region::D})) {
      Vec3 b = Vec3::Zero();
      b.head(mesh.dim) = mesh.cellBarycenter.row(c);
      cm += mesh.cellVolume[c] * b;
      vol += mesh.cellVolume[c];
    }
    cm /= vol;
    double slack = 0.1 * bump.width;
    for (int d = 0; d < mesh.dim; ++d) cm[d] += slack * unif(rng);
    bump.center = cm;
  }

  BoundaryOperator localRef = assemble_local_dtn(mesh, grads, gamma0, opts);
  BoundaryOperator fullRef = assemble_full_dtn(mesh, grads, gamma0, opts);

  double hFd = sweep.hFd > 0 ? sweep.hFd : default_fd_step(mesh.params);
  bool anyPositive = false;
  for (int k = 0; k < sweep.K; ++k) {
    SweepRow row;
    row.t = sweep.t0 * std::pow(2.0, -k);
    bump.amplitude = row.t;
    PerturbResult pert = perturb_in_D(gamma0, bump);
    row.supGap = pert.supGap;
    if (row.supGap > 0) anyPositive = true;

    BoundaryOperator local2 = assemble_local_dtn(mesh, grads, pert.gamma, opts);
    BoundaryOperator full2 = assemble_full_dtn(mesh, grads, pert.gamma, opts);
    row.epsilon = op_norm(localRef.op - local2.op, localRef.gram);
    row.fullGap = op_norm(fullRef.op - full2.op, fullRef.gram);
    if (row.epsilon < rep.epsilonFloor) row.dropped = true;

    if (sweep.withReconstruction && !row.dropped) {
      SKernelEngine engine(mesh, grads, gamma0, pert.gamma, opts);
      VecX eta1 = fourier_on_circle(mesh, fullRef.dofs, 1, false);
      VecX eta2 = fourier_on_circle(mesh, fullRef.dofs, 2, true);
      ReconstructionResult rr =
          reconstruct_gap_via_S(mesh, grads, gamma0, pert.gamma, eta1, eta2,
                                fullRef, full2, engine, hFd, opts);
      row.reconRelGap = rr.relGap;
    }
    rep.rows.push_back(row);
  }
  if (!anyPositive) fail("sweep.t0", "degenerate sweep: all perturbations vanish");

  std::vector<double> logEps, logFull, logLogEps, logSup;
  rep.epsilonStrictlyDecreasing = true;
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& r : rep.rows) {
    if (r.dropped) continue;
    if (r.epsilon >= prev) rep.epsilonStrictlyDecreasing = false;
    prev = r.epsilon;
    logEps.push_back(std::log(r.epsilon));
    logFull.push_back(std::log(std::max(r.fullGap, 1e-300)));
    logLogEps.push_back(std::log(std::abs(std::log(r.epsilon))));
    logSup.push_back(std::log(std::max(r.supGap, 1e-300)));
  }
  if (logEps.size() < 2) fail("sweep", "too few usable amplitudes after dropping");

  LineFit betaFit = fit_line(logEps, logFull);
  rep.fittedBeta = betaFit.slope;
  rep.betaR2 = betaFit.r2;
  rep.betaResidual = betaFit.residual;
  double cBeta = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < logEps.size(); ++i)
    cBeta = std::max(cBeta, logFull[i] - rep.fittedBeta * logEps[i]);
  rep.betaC = std::exp(cBeta);

  LineFit deltaFit = fit_line(logLogEps, logSup);
  rep.fittedDelta = std::clamp(-deltaFit.slope, 1e-6, 1.0);
  rep.deltaResidual = deltaFit.residual;
  double cDelta = 0;
  for (size_t i = 0; i < logEps.size(); ++i)
    cDelta = std::max(cDelta, logSup[i] + rep.fittedDelta * logLogEps[i]);
  rep.deltaC = std::max(1.0, std::exp(cDelta));

  PropagationFit prop = fit_propagation(mesh, grads, gamma0,
                                        sweep.propagationFamily, sweep.seed, opts);
  rep.fittedEta = prop.eta;
  rep.etaC = prop.C;
  rep.etaMargin = prop.margin;
  return rep;
}

}  // namespace calderon

#pragma once

#include <cstdint>

#include "calderon/skernel.hpp"

namespace calderon {

/// Nodal trapezoid quadrature on a closed tagged surface: one point per
/// facet in count, abscissae at the mesh vertices so kernel sources need
/// no snapping.
struct NodalQuadrature {
  std::vector<int> verts;  // global vertex ids
  VecX weights;            // half-sum of incident facet measures
  MatX normals;            // outward unit normal per vertex (n x dim)
};
NodalQuadrature nodal_quadrature(const MeshedDomain& mesh, Boundary tag);

/// Dirichlet data cos(k theta) or sin(k theta) on the vertices of a
/// circular interface, zero elsewhere (2D families).
VecX fourier_on_circle(const MeshedDomain& mesh, const std::vector<int>& verts,
                       int k, bool sine);

struct ReconstructionResult {
  double direct = 0;   // <(Lambda1 - Lambda2) eta1, eta2> from the full maps
  double viaS = 0;     // I1 - I2 - I3 + I4
  double I1 = 0, I2 = 0, I3 = 0, I4 = 0;
  double absGap = 0, relGap = 0;
  double maxTangentialError = 0;  // worst stencil snap residual
};

/// Four-integral reconstruction of the full-DtN pairing from the kernel,
/// against the direct Galerkin value.
ReconstructionResult reconstruct_gap_via_S(
    const MeshedDomain& mesh, const MeshGradients& grads,
    const ConductivityField& gamma1, const ConductivityField& gamma2,
    const VecX& eta1Global, const VecX& eta2Global, const BoundaryOperator& full1,
    const BoundaryOperator& full2, SKernelEngine& engine, double hFd,
    const SolverOptions& opts = {});

struct PropagationFit {
  double C = 1, eta = 0.5;
  double margin = 0;      // min over members of the satisfied-slack (>= 0)
  double objective = 0;   // minimized max violation (log scale)
  std::vector<double> normBall, normEroded, normShell;
};

/// Exact feasibility fit of  log m <= log C + eta log a + (1-eta) log b
/// over a family of norm triples, minimizing the max violation subject to
/// eta in (0,1); the objective is convex in eta.
PropagationFit fit_interpolation_lp(const std::vector<double>& normBall,
                                    const std::vector<double>& normEroded,
                                    const std::vector<double>& normShell);

/// Fits the interpolation inequality  m <= C a^eta b^(1-eta)  over a
/// family of discrete gamma0-harmonic functions on the shell outside D,
/// minimizing the max violation over eta in (0,1).  a, m, b are L2 norms
/// on the ball at Q, the h1-eroded shell, and the full shell.
PropagationFit fit_propagation(const MeshedDomain& mesh, const MeshGradients& grads,
                               const ConductivityField& gamma0, int familySize,
                               std::uint64_t seed, const SolverOptions& opts = {});

struct CascadeCheck {
  double epsilon = 0;        // local-DtN gap norm
  double normBall = 0;       // ||S(.,w)|| on the ball at Q
  double normShell = 0;      // ||S(.,w)|| on the shell outside D'
  double measured = 0;       // ||S(.,w)|| on the h1-eroded shell
  double predicted = 0;      // C * normBall^eta * normShell^(1-eta)
  double cPrime = 0;         // normBall / epsilon
  bool holds = false;
};

/// Applies a fitted propagation inequality to the kernel slice S(., w).
CascadeCheck cascade_smallness(const MeshedDomain& mesh, const MeshGradients& grads,
                               SKernelEngine& engine, const PropagationFit& fit,
                               double epsilon, int vw);

struct SweepRow {
  double t = 0, epsilon = 0, fullGap = 0, supGap = 0;
  double reconRelGap = -1;  // I1-I4 agreement diagnostic, -1 when skipped
  bool dropped = false;
};

struct ExperimentReport {
  std::string runId;
  std::vector<SweepRow> rows;
  double epsilonFloor = 0;  // drop threshold used
  // log-log fit fullGap <= C eps^beta
  double fittedBeta = 0, betaC = 1, betaR2 = 0, betaResidual = 0;
  // supGap <= C |log eps|^-delta with C >= 1
  double fittedDelta = 0, deltaC = 1, deltaResidual = 0;
  // propagation exponent
  double fittedEta = 0, etaC = 1, etaMargin = 0;
  double lambdaInvCap = 0;  // the trivial-branch bound lambda^{-1}
  bool epsilonStrictlyDecreasing = false;
};

struct SweepOptions {
  double t0 = 0.4;
  int K = 6;
  BumpSpec bump;                // amplitude ignored; center may be seeded
  bool randomCenter = true;     // place the bump center inside D by seed
  bool withReconstruction = true;
  double hFd = 0;               // 0: default max(4h, rho2/8) clamped to [2h, rho2/4]
  int propagationFamily = 50;
  std::uint64_t seed = 1;
};

ExperimentReport stability_sweep(const MeshedDomain& mesh, const MeshGradients& grads,
                                 const ConductivityField& gamma0,
                                 const SweepOptions& sweep,
                                 const SolverOptions& opts = {});

/// Default finite-difference step clamped into the valid interval.
double default_fd_step(const GeometryParams& p);

/// Least-squares slope fit with R^2 on (x, y) pairs.
struct LineFit {
  double slope = 0, intercept = 0, r2 = 0, residual = 0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace calderon

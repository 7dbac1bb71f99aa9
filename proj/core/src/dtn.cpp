#include "calderon/dtn.hpp"

#include <Eigen/Eigenvalues>

#include <unordered_map>
#include <unordered_set>

namespace calderon {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw ValidationError(ErrorKind::Solver, "dtn", msg);
}

}  // namespace

std::vector<int> omega_boundary_facets(const MeshedDomain& mesh) {
  std::vector<int> out;
  for (int f = 0; f < static_cast<int>(mesh.facets.size()); ++f) {
    const auto& fa = mesh.facets[f];
    bool innerInOmega = mesh.cellRegion[fa.cellInner] != Region::A;
    bool outerOutside = fa.cellOuter < 0 || mesh.cellRegion[fa.cellOuter] == Region::A;
    if (innerInOmega && outerOutside) out.push_back(f);
  }
  return out;
}

std::vector<int> sigma_interior_vertices(const MeshedDomain& mesh) {
  std::vector<char> onSigma(mesh.numVertices(), 0), onRest(mesh.numVertices(), 0);
  for (int f : omega_boundary_facets(mesh)) {
    const auto& fa = mesh.facets[f];
    bool sigma = fa.tag == Boundary::Sigma || fa.tag == Boundary::Sigma0;
    for (int k = 0; k < mesh.verticesPerFacet(); ++k)
      (sigma ? onSigma : onRest)[fa.v[k]] = 1;
  }
  std::vector<int> out;
  for (int v = 0; v < mesh.numVertices(); ++v)
    if (onSigma[v] && !onRest[v]) out.push_back(v);
  return out;
}

MatX gram_half(const MeshedDomain& mesh, const std::vector<int>& facetIds,
               const std::vector<int>& dofs) {
  if (dofs.empty()) fail("empty dof set for the H^{1/2} Gram matrix");
  Eigen::SparseMatrix<double> Ms, Ks;
  boundary_mass_stiffness(mesh, facetIds, dofs, Ms, Ks);
  MatX M = MatX(Ms), K = MatX(Ks);
  const int n = static_cast<int>(dofs.size());
  if (n == 1) {
    // Degenerate single-node tag: mass-only norm.
    return M;
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<MatX> ges(K, M);
  if (ges.info() != Eigen::Success) fail("boundary pencil eigendecomposition failed");
  VecX mu = ges.eigenvalues().cwiseMax(0.0);
  MatX V = ges.eigenvectors();  // V^T M V = I
  VecX scale = (VecX::Ones(n) + mu).cwiseSqrt();
  MatX MV = M * V;
  return MV * scale.asDiagonal() * MV.transpose();
}

MatX dtn_matrix(const RegionSystem& sys, const std::vector<int>& dofs) {
  const int n = static_cast<int>(dofs.size());
  const auto& nodes = sys.nodes();
  // Local boundary index per dof.
  std::unordered_map<int, int> boundaryIndex;
  {
    int i = 0;
    for (int l : sys.boundaryLocal()) boundaryIndex[nodes[l]] = i++;
  }
  std::vector<int> dofBoundary(n), dofLocal(n);
  for (int j = 0; j < n; ++j) {
    auto it = boundaryIndex.find(dofs[j]);
    if (it == boundaryIndex.end())
      fail("dof vertex " + std::to_string(dofs[j]) +
           " is not a boundary node of the solve region");
    dofBoundary[j] = it->second;
    dofLocal[j] = sys.localIndex(dofs[j]);
  }

  MatX L(n, n);
  const int nb = static_cast<int>(sys.boundaryLocal().size());
  for (int j = 0; j < n; ++j) {
    VecX data = VecX::Zero(nb);
    data[dofBoundary[j]] = 1.0;
    double residual = 0;
    VecX u;
    try {
      u = sys.solveDirichletLocal(data, &residual);
    } catch (const ValidationError& e) {
      fail("column solve failed for dof " + std::to_string(j) + ": " + e.what());
    }
    VecX flux = sys.applyK(u);
    for (int i = 0; i < n; ++i) L(i, j) = flux[dofLocal[i]];
  }
  return L;
}

BoundaryOperator assemble_local_dtn(const MeshedDomain& mesh,
                                    const MeshGradients& grads,
                                    const ConductivityField& gamma,
                                    const SolverOptions& opts) {
  BoundaryOperator op;
  op.tag = Boundary::Sigma;
  op.dofs = sigma_interior_vertices(mesh);
  if (op.dofs.empty()) fail("Sigma carries no interior boundary vertices");

  std::vector<int> omegaCells = mesh.cellsOf(
      {Region::OmegaMinusDtilde, Region::DtildeMinusDprime, Region::DprimeMinusD,
       Region::D});
  RegionSystem sys(mesh, grads, gamma, omegaCells, opts);
  op.op = dtn_matrix(sys, op.dofs);

  std::vector<int> sigmaFacets = mesh.facetsOfSigmaAll();
  op.gram = gram_half(mesh, sigmaFacets, op.dofs);
  return op;
}

BoundaryOperator assemble_full_dtn(const MeshedDomain& mesh,
                                   const MeshGradients& grads,
                                   const ConductivityField& gamma,
                                   const SolverOptions& opts) {
  BoundaryOperator op;
  op.tag = Boundary::dDtilde;
  std::vector<int> facets = mesh.facetsOf(Boundary::dDtilde);
  op.dofs = mesh.facetVertices(facets);
  if (op.dofs.empty()) fail("dDtilde carries no vertices");

  std::vector<int> cells = mesh.cellsOf(
      {Region::DtildeMinusDprime, Region::DprimeMinusD, Region::D});
  RegionSystem sys(mesh, grads, gamma, cells, opts);
  op.op = dtn_matrix(sys, op.dofs);
  op.gram = gram_half(mesh, facets, op.dofs);
  return op;
}

double op_norm(const MatX& A, const MatX& gram) {
  if (A.rows() != A.cols() || gram.rows() != gram.cols() || A.rows() != gram.rows())
    fail("operator and Gram dimensions do not match");
  MatX S = 0.5 * (A + A.transpose());
  Eigen::SelfAdjointEigenSolver<MatX> eg(gram);
  if (eg.info() != Eigen::Success) fail("Gram eigendecomposition failed");
  VecX d = eg.eigenvalues();
  if (d.minCoeff() <= 0) fail("Gram matrix is not positive definite");
  MatX Ginvsqrt =
      eg.eigenvectors() * d.cwiseSqrt().cwiseInverse().asDiagonal() *
      eg.eigenvectors().transpose();
  MatX B = Ginvsqrt * S * Ginvsqrt;
  Eigen::SelfAdjointEigenSolver<MatX> eb(0.5 * (B + B.transpose()));
  return eb.eigenvalues().cwiseAbs().maxCoeff();
}

VecX generalized_eigenvalues(const MatX& A, const MatX& M) {
  Eigen::GeneralizedSelfAdjointEigenSolver<MatX> ges(0.5 * (A + A.transpose()), M);
  if (ges.info() != Eigen::Success) fail("generalized eigendecomposition failed");
  return ges.eigenvalues();
}

}  // namespace calderon

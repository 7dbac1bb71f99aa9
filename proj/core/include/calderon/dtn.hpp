#pragma once

#include "calderon/fem.hpp"

namespace calderon {

/// Discrete Dirichlet-to-Neumann map on a set of boundary degrees of
/// freedom, together with the Gram matrix realizing the discrete H^{1/2}
/// inner product on the same degrees of freedom.  Entry (i,j) of `op` is
/// the flux pairing <Lambda hat_j, hat_i>.
struct BoundaryOperator {
  MatX op;
  MatX gram;
  std::vector<int> dofs;  // global vertex ids
  Boundary tag = Boundary::Sigma;
};

/// Boundary vertices whose hat functions are supported in the closure of
/// Sigma: vertices incident to Sigma/Sigma0 facets and to no other facet
/// of the boundary of Omega.
std::vector<int> sigma_interior_vertices(const MeshedDomain& mesh);

/// Facets of the boundary of Omega (the original domain, bulge excluded).
std::vector<int> omega_boundary_facets(const MeshedDomain& mesh);

/// H^{1/2} Gram matrix on the dofs: with M the boundary mass matrix and
/// K the boundary Laplace-Beltrami stiffness over `facetIds`, this is
/// M V (I + diag(mu))^{1/2} V^T M where (mu, V) solve the generalized
/// eigenproblem K V = M V diag(mu) with V^T M V = I.
MatX gram_half(const MeshedDomain& mesh, const std::vector<int>& facetIds,
               const std::vector<int>& dofs);

/// Local map on Sigma: column j solves the Dirichlet problem on Omega
/// with hat-function data at dof j (support inside Sigma), rows are flux
/// pairings against the dof hat functions.
BoundaryOperator assemble_local_dtn(const MeshedDomain& mesh,
                                    const MeshGradients& grads,
                                    const ConductivityField& gamma,
                                    const SolverOptions& opts = {});

/// Full map on the interior surface dDtilde, solved on Dtilde.
BoundaryOperator assemble_full_dtn(const MeshedDomain& mesh,
                                   const MeshGradients& grads,
                                   const ConductivityField& gamma,
                                   const SolverOptions& opts = {});

/// Shared column-solve core: DtN matrix for the given system and dof set.
MatX dtn_matrix(const RegionSystem& sys, const std::vector<int>& dofs);

/// Operator norm of the symmetric bilinear form A from H^{1/2} to its
/// dual: the largest |eigenvalue| of G^{-1/2} A G^{-1/2}.
double op_norm(const MatX& A, const MatX& gram);

/// Largest-k generalized eigenvalues of (A, M), ascending.
VecX generalized_eigenvalues(const MatX& A, const MatX& M);

}  // namespace calderon

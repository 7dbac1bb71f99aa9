#pragma once

#include <memory>
#include <mutex>

#include <Eigen/Sparse>

#include "calderon/conductivity.hpp"
#include "calderon/geometry.hpp"

namespace calderon {

struct SolverOptions {
  double tol = 1e-12;            // relative residual
  int maxIter = 20000;
  int directMaxUnknowns = 200000;  // direct factorization below, CG above
};

/// Per-cell P1 shape-function gradients, shared across solves on a mesh.
class MeshGradients {
 public:
  explicit MeshGradients(const MeshedDomain& mesh);
  const MeshedDomain& mesh() const { return *mesh_; }
  /// dim x (dim+1) gradient matrix of the barycentric shape functions.
  const Eigen::Matrix<double, 3, 4>& cell(int c) const { return grads_[c]; }
  /// Gradient of the P1 interpolant of nodal values on cell c.
  Vec3 gradient(int c, const VecX& nodal) const;

 private:
  const MeshedDomain* mesh_;
  std::vector<Eigen::Matrix<double, 3, 4>> grads_;
};

/// Galerkin system for div(gamma grad u) = f on a tagged cell set with
/// Dirichlet conditions on the set's boundary.  The interior-block
/// factorization is built once and shared by all right-hand sides.
class RegionSystem {
 public:
  RegionSystem(const MeshedDomain& mesh, const MeshGradients& grads,
               const ConductivityField& gamma, std::vector<int> cellSet,
               SolverOptions opts = {});

  const MeshedDomain& mesh() const { return *mesh_; }
  const std::vector<int>& cellSet() const { return cells_; }
  const std::vector<int>& nodes() const { return nodes_; }  // global ids
  int localIndex(int globalVertex) const { return g2l_[globalVertex]; }
  const std::vector<int>& boundaryLocal() const { return boundary_; }
  const std::vector<int>& interiorLocal() const { return interior_; }
  bool isBoundaryLocal(int l) const { return isBoundary_[l]; }
  int numUnknowns() const { return static_cast<int>(interior_.size()); }
  bool usesDirect() const { return useDirect_; }

  const Eigen::SparseMatrix<double>& stiffness() const { return K_; }

  /// K applied to a local vector.
  VecX applyK(const VecX& local) const { return K_ * local; }

  /// Solves with Dirichlet data read from a global vector at boundary
  /// nodes; zero interior load.  Returns local nodal values.
  VecX solveDirichletGlobal(const VecX& globalData, double* residual = nullptr) const;
  /// Dirichlet data given per local boundary index (ordering of
  /// boundaryLocal()).
  VecX solveDirichletLocal(const VecX& boundaryData, double* residual = nullptr) const;
  /// Zero Dirichlet data, point/distributed load given as local RHS
  /// (entries at boundary nodes are ignored).
  VecX solveLoadLocal(const VecX& loadLocal, double* residual = nullptr) const;

 private:
  VecX solveInterior(const VecX& rhsInterior, double* residual) const;

  const MeshedDomain* mesh_;
  const ConductivityField* gamma_;
  SolverOptions opts_;
  std::vector<int> cells_;
  std::vector<int> nodes_;
  std::vector<int> g2l_;
  std::vector<int> interior_, boundary_;
  std::vector<char> isBoundary_;
  std::vector<int> localToInterior_;
  Eigen::SparseMatrix<double> K_;    // full local stiffness
  Eigen::SparseMatrix<double> Kii_;  // interior block
  Eigen::SparseMatrix<double> Kib_;  // interior x boundary
  bool useDirect_ = true;
  mutable std::once_flag factorOnce_;
  mutable std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt_;
};

struct FieldSolution {
  const RegionSystem* system = nullptr;
  VecX local;              // nodal values in system ordering
  double residualNorm = 0;
  double at(int globalVertex) const {
    return local[system->localIndex(globalVertex)];
  }
  /// Scatter into a global-sized vector (zeros elsewhere).
  VecX scatter(int numVertices) const;
};

/// Dirichlet solve on the cells of the given regions.
FieldSolution solve_dirichlet(const RegionSystem& sys, const VecX& globalBoundaryData);

struct GreensFunction {
  int sourceVertex = -1;   // snapped source node (global id)
  double snapDistance = 0;
  VecX values;             // global-sized nodal values, zero on the outer boundary
};

/// Discrete Green's function on the augmented domain: unit load at the
/// mesh node nearest y, zero Dirichlet condition on the outer boundary.
/// `sysFull` must be the system over all regions.
GreensFunction greens_function(const RegionSystem& sysFull, const Vec3& y);
GreensFunction greens_function_at_vertex(const RegionSystem& sysFull, int vertex);

/// Dirichlet energy of `values` outside the ball B_r(y), by elementwise
/// quadrature with subcell volume fractions.
double energy_annulus(const MeshGradients& grads, const VecX& globalValues,
                      const Vec3& y, double r);

/// Variational co-normal flux of a solution: coefficients of the flux
/// functional against the boundary hat functions (rows of K u at the
/// region's boundary nodes).
struct BoundaryFlux {
  std::vector<int> nodes;  // global vertex ids on the region boundary
  VecX coeffs;             // <gamma du/dnu, hat_i>
};
BoundaryFlux conormal_flux(const RegionSystem& sys, const FieldSolution& u);

/// L2 projection of the flux functional onto the P1 trace space of the
/// facet set: nodal values of the co-normal flux density gamma du/dnu.
VecX flux_density(const MeshedDomain& mesh, const std::vector<int>& facetIds,
                  const BoundaryFlux& flux);

/// Boundary mass and Laplace-Beltrami stiffness over a facet set,
/// assembled on the listed vertex ids.
void boundary_mass_stiffness(const MeshedDomain& mesh,
                             const std::vector<int>& facetIds,
                             const std::vector<int>& vertexIds,
                             Eigen::SparseMatrix<double>& mass,
                             Eigen::SparseMatrix<double>& stiffness);

/// L2 norm of the P1 interpolant over a cell set (consistent mass).
double l2_norm_on_cells(const MeshedDomain& mesh, const std::vector<int>& cellSet,
                        const VecX& globalValues);

}  // namespace calderon

#pragma once

#include <mutex>
#include <unordered_map>

#include "calderon/dtn.hpp"

namespace calderon {

/// Sampled values of the cross-conductivity kernel and its normal
/// derivatives on point grids.
struct SKernelSample {
  MatX zPoints, wPoints;       // snapped sample positions (n x dim)
  std::vector<int> zVerts, wVerts;
  MatX values;                 // S(z_j, w_k)
  MatX dSdnuZ, dSdnuW, d2SdnuZdnuW;
  std::string method;          // "direct" or "pairing"
  double maxAbs() const { return values.size() ? values.cwiseAbs().maxCoeff() : 0; }
};

/// One-dimensional three-point differentiation stencil along a normal,
/// built from snapped mesh vertices at signed offsets.
struct NormalStencil {
  std::array<int, 3> verts{-1, -1, -1};   // inner, center, outer
  std::array<double, 3> offsets{0, 0, 0}; // signed distances along the normal
  std::array<double, 3> deriv{0, 0, 0};   // f'(0) coefficients
  double tangentialError = 0;             // worst snap residual off the line
  bool valid = false;
};

/// Evaluates S(z,w) = int_D (gamma1-gamma2) grad G1(.,z) . grad G2(.,w)
/// through the discrete Green functions of the augmented domain.  The two
/// interior-block factorizations are built once; per-source restricted
/// gradients are cached.
class SKernelEngine {
 public:
  SKernelEngine(const MeshedDomain& mesh, const MeshGradients& grads,
                const ConductivityField& gamma1, const ConductivityField& gamma2,
                SolverOptions opts = {});

  const MeshedDomain& mesh() const { return *mesh_; }
  const RegionSystem& system(int which) const { return which == 0 ? sys1_ : sys2_; }
  const std::vector<int>& supportCells() const { return support_; }

  /// S with both sources snapped to the nearest mesh vertex; throws when
  /// a source falls inside closure(D).
  double s_direct(const Vec3& z, const Vec3& w, int* vzOut = nullptr,
                  int* vwOut = nullptr);
  double s_direct_vertices(int vz, int vw);

  /// S matrix over vertex grids (rows: z, cols: w).
  MatX s_matrix(const std::vector<int>& zVerts, const std::vector<int>& wVerts);

  /// Nodal field of z -> S(z, w) (respectively w -> S(z, w)) over the
  /// whole augmented domain, computed with one extra solve.
  VecX s_field_in_first(int vw);
  VecX s_field_in_second(int vz);

  /// Local-DtN pairing route, valid for sources in the ball at Q:
  /// <(Lambda1 - Lambda2) trace G1(.,z), trace G2(.,w)>.
  double s_via_pairing(int vz, int vw, const BoundaryOperator& localDiff);

  /// Trace of the Green function (side `which`) on the dof vertices.
  VecX green_trace(int which, int sourceVertex, const std::vector<int>& dofs);
  /// H^{1/2} norm of a trace vector under the operator's Gram.
  static double trace_norm(const VecX& trace, const MatX& gram);

  /// Gradient field of a weighted combination of Green functions of side
  /// `which` (loads at vertices), returned as nodal values.
  VecX green_combination(int which, const std::vector<std::pair<int, double>>& loads);

  /// sum_c (gamma1-gamma2)(c) vol_c grad a . grad b over the support cells.
  double contract(const VecX& nodalA, const VecX& nodalB) const;

  /// Differentiation stencil at a surface point along its outward normal;
  /// invalid when the stencil leaves the shell between D' and the outer
  /// boundary.
  NormalStencil stencil(const Vec3& point, const Vec3& normal, double hFd) const;

  /// S and its normal derivatives on a surface quadrature of dDtilde.
  SKernelSample normal_derivatives(const SurfaceQuadrature& quad, double hFd);

  struct ResidualReport {
    double maxAbs = 0;
    double scale = 1;
    double relative = 0;
  };
  /// Weak residual of div(gamma0 grad .) applied to S(., w) against the
  /// interior hat functions of the shell outside closure(D).
  ResidualReport elliptic_residual_in_z(int vw);
  ResidualReport elliptic_residual_in_w(int vz);

  int snapVertex(const Vec3& p, double* dist = nullptr) const;
  bool vertexInShellOutsideDprime(int v) const { return shellDprimeVertex_[v]; }

 private:
  const VecX& supportGradients(int which, int sourceVertex);
  ResidualReport residual_impl(const VecX& sField, const VecX& load);

  const MeshedDomain* mesh_;
  const MeshGradients* grads_;
  const ConductivityField *gamma1_, *gamma2_;
  RegionSystem sys1_, sys2_;
  std::vector<int> support_;       // cells with gamma1 != gamma2
  VecX supportWeight_;             // (gamma1-gamma2) * vol per support cell
  std::vector<char> dbarVertex_;   // vertices of closure(D)
  std::vector<char> shellDprimeVertex_;
  std::unordered_map<long long, VecX> gradCache_;
  std::mutex cacheMutex_;
};

}  // namespace calderon

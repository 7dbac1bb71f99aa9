#include "calderon/skernel.hpp"

#include <cmath>

namespace calderon {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw ValidationError(ErrorKind::Solver, "skernel", msg);
}

std::vector<int> all_cells(const MeshedDomain& mesh) {
  std::vector<int> out(mesh.numCells());
  for (int c = 0; c < mesh.numCells(); ++c) out[c] = c;
  return out;
}

}  // namespace

SKernelEngine::SKernelEngine(const MeshedDomain& mesh, const MeshGradients& grads,
                             const ConductivityField& gamma1,
                             const ConductivityField& gamma2, SolverOptions opts)
    : mesh_(&mesh),
      grads_(&grads),
      gamma1_(&gamma1),
      gamma2_(&gamma2),
      sys1_(mesh, grads, gamma1, all_cells(mesh), opts),
      sys2_(mesh, grads, gamma2, all_cells(mesh), opts) {
  for (int c = 0; c < mesh.numCells(); ++c) {
    double d = gamma1.onCell(c) - gamma2.onCell(c);
    if (d != 0.0) support_.push_back(c);
  }
  supportWeight_.resize(support_.size());
  for (size_t i = 0; i < support_.size(); ++i) {
    int c = support_[i];
    supportWeight_[i] = (gamma1.onCell(c) - gamma2.onCell(c)) * mesh.cellVolume[c];
  }

  dbarVertex_.assign(mesh.numVertices(), 0);
  shellDprimeVertex_.assign(mesh.numVertices(), 0);
  std::vector<char> dprimeVertex(mesh.numVertices(), 0);
  for (int c = 0; c < mesh.numCells(); ++c) {
    Region r = mesh.cellRegion[c];
    for (int k = 0; k <= mesh.dim; ++k) {
      int v = mesh.cells[c][k];
      if (r == Region::D) dbarVertex_[v] = 1;
      if (r == Region::D || r == Region::DprimeMinusD) dprimeVertex[v] = 1;
      else shellDprimeVertex_[v] = 1;
    }
  }
  // Shell vertices strictly outside closure(D'): drop the interface ring.
  for (int v = 0; v < mesh.numVertices(); ++v)
    if (dprimeVertex[v]) shellDprimeVertex_[v] = 0;
}

int SKernelEngine::snapVertex(const Vec3& p, double* dist) const {
  int v = nearest_vertex(*mesh_, p.head(mesh_->dim));
  if (dist) {
    Vec3 x = Vec3::Zero();
    x.head(mesh_->dim) = mesh_->vertices.row(v);
    *dist = (x - p).norm();
  }
  return v;
}

const VecX& SKernelEngine::supportGradients(int which, int sourceVertex) {
  long long key = (static_cast<long long>(which) << 32) | sourceVertex;
  {
    std::lock_guard<std::mutex> lk(cacheMutex_);
    auto it = gradCache_.find(key);
    if (it != gradCache_.end()) return it->second;
  }
  const RegionSystem& sys = system(which);
  int l = sys.localIndex(sourceVertex);
  if (l < 0 || sys.isBoundaryLocal(l))
    fail("Green source vertex " + std::to_string(sourceVertex) +
         " is invalid (outside the domain or on the outer boundary)");
  VecX load = VecX::Zero(sys.nodes().size());
  load[l] = 1.0;
  VecX sol = sys.solveLoadLocal(load, nullptr);
  // Restricted gradients over the support cells.
  VecX g(mesh_->dim * support_.size());
  for (size_t i = 0; i < support_.size(); ++i) {
    int c = support_[i];
    Vec3 gr = Vec3::Zero();
    for (int k = 0; k <= mesh_->dim; ++k)
      gr += grads_->cell(c).col(k) * sol[sys.localIndex(mesh_->cells[c][k])];
    for (int d = 0; d < mesh_->dim; ++d) g[mesh_->dim * i + d] = gr[d];
  }
  std::lock_guard<std::mutex> lk(cacheMutex_);
  return gradCache_.emplace(key, std::move(g)).first->second;
}

double SKernelEngine::s_direct_vertices(int vz, int vw) {
  if (dbarVertex_[vz] || dbarVertex_[vw])
    fail("kernel source lies inside closure(D)");
  const VecX& g1 = supportGradients(0, vz);
  const VecX& g2 = supportGradients(1, vw);
  double s = 0;
  const int dim = mesh_->dim;
  for (size_t i = 0; i < support_.size(); ++i) {
    double dot = 0;
    for (int d = 0; d < dim; ++d) dot += g1[dim * i + d] * g2[dim * i + d];
    s += supportWeight_[i] * dot;
  }
  return s;
}

double SKernelEngine::s_direct(const Vec3& z, const Vec3& w, int* vzOut, int* vwOut) {
  int vz = snapVertex(z), vw = snapVertex(w);
  if (vzOut) *vzOut = vz;
  if (vwOut) *vwOut = vw;
  return s_direct_vertices(vz, vw);
}

MatX SKernelEngine::s_matrix(const std::vector<int>& zVerts,
                             const std::vector<int>& wVerts) {
  MatX S(zVerts.size(), wVerts.size());
  for (size_t j = 0; j < zVerts.size(); ++j)
    for (size_t k = 0; k < wVerts.size(); ++k)
      S(j, k) = s_direct_vertices(zVerts[j], wVerts[k]);
  return S;
}

VecX SKernelEngine::green_combination(
    int which, const std::vector<std::pair<int, double>>& loads) {
  const RegionSystem& sys = system(which);
  VecX load = VecX::Zero(sys.nodes().size());
  for (auto [v, c] : loads) {
    int l = sys.localIndex(v);
    if (l < 0 || sys.isBoundaryLocal(l))
      fail("combination load at invalid vertex " + std::to_string(v));
    load[l] += c;
  }
  VecX sol = sys.solveLoadLocal(load, nullptr);
  VecX global = VecX::Zero(mesh_->numVertices());
  const auto& nodes = sys.nodes();
  for (size_t i = 0; i < nodes.size(); ++i) global[nodes[i]] = sol[i];
  return global;
}

double SKernelEngine::contract(const VecX& nodalA, const VecX& nodalB) const {
  double s = 0;
  for (size_t i = 0; i < support_.size(); ++i) {
    int c = support_[i];
    Vec3 ga = grads_->gradient(c, nodalA);
    Vec3 gb = grads_->gradient(c, nodalB);
    s += supportWeight_[i] * ga.dot(gb);
  }
  return s;
}

VecX SKernelEngine::s_field_in_first(int vw) {
  if (dbarVertex_[vw]) fail("kernel source lies inside closure(D)");
  const VecX& g2 = supportGradients(1, vw);
  // S(., w) = K1^{-1} q with q the assembled pairing of (gamma1-gamma2)
  // grad G2(., w) against the hat-function gradients.
  const RegionSystem& sys = sys1_;
  VecX q = VecX::Zero(sys.nodes().size());
  const int dim = mesh_->dim;
  for (size_t i = 0; i < support_.size(); ++i) {
    int c = support_[i];
    Vec3 gw = Vec3::Zero();
    for (int d = 0; d < dim; ++d) gw[d] = g2[dim * i + d];
    for (int k = 0; k <= dim; ++k) {
      int l = sys.localIndex(mesh_->cells[c][k]);
      q[l] += supportWeight_[i] * grads_->cell(c).col(k).dot(gw);
    }
  }
  VecX sol = sys.solveLoadLocal(q, nullptr);
  VecX global = VecX::Zero(mesh_->numVertices());
  const auto& nodes = sys.nodes();
  for (size_t i = 0; i < nodes.size(); ++i) global[nodes[i]] = sol[i];
  return global;
}

VecX SKernelEngine::s_field_in_second(int vz) {
  if (dbarVertex_[vz]) fail("kernel source lies inside closure(D)");
  const VecX& g1 = supportGradients(0, vz);
  const RegionSystem& sys = sys2_;
  VecX q = VecX::Zero(sys.nodes().size());
  const int dim = mesh_->dim;
  for (size_t i = 0; i < support_.size(); ++i) {
    int c = support_[i];
    Vec3 gz = Vec3::Zero();
    for (int d = 0; d < dim; ++d) gz[d] = g1[dim * i + d];
    for (int k = 0; k <= dim; ++k) {
      int l = sys.localIndex(mesh_->cells[c][k]);
      q[l] += supportWeight_[i] * grads_->cell(c).col(k).dot(gz);
    }
  }
  VecX sol = sys.solveLoadLocal(q, nullptr);
  VecX global = VecX::Zero(mesh_->numVertices());
  const auto& nodes = sys.nodes();
  for (size_t i = 0; i < nodes.size(); ++i) global[nodes[i]] = sol[i];
  return global;
}

VecX SKernelEngine::green_trace(int which, int sourceVertex,
                                const std::vector<int>& dofs) {
  const RegionSystem& sys = system(which);
  int l = sys.localIndex(sourceVertex);
  if (l < 0 || sys.isBoundaryLocal(l)) fail("invalid Green source vertex");
  VecX load = VecX::Zero(sys.nodes().size());
  load[l] = 1.0;
  VecX sol = sys.solveLoadLocal(load, nullptr);
  VecX tr(dofs.size());
  for (size_t i = 0; i < dofs.size(); ++i) {
    int li = sys.localIndex(dofs[i]);
    tr[i] = li < 0 ? 0.0 : sol[li];
  }
  return tr;
}

double SKernelEngine::trace_norm(const VecX& trace, const MatX& gram) {
  return std::sqrt(std::max(0.0, trace.dot(gram * trace)));
}

double SKernelEngine::s_via_pairing(int vz, int vw,
                                    const BoundaryOperator& localDiff) {
  const MeshedDomain& mesh = *mesh_;
  double r1 = mesh.rho1();
  for (int v : {vz, vw}) {
    Vec3 x = Vec3::Zero();
    x.head(mesh.dim) = mesh.vertices.row(v);
    if ((x - mesh.markedPoint).norm() > r1)
      fail("pairing source vertex " + std::to_string(v) +
           " lies outside the ball at the marked point");
  }
  VecX t1 = green_trace(0, vz, localDiff.dofs);
  VecX t2 = green_trace(1, vw, localDiff.dofs);
  return t2.dot(localDiff.op * t1);
}

NormalStencil SKernelEngine::stencil(const Vec3& point, const Vec3& normal,
                                     double hFd) const {
  NormalStencil st;
  const int dim = mesh_->dim;
  Vec3 offsets[3] = {-hFd * normal, Vec3::Zero(), hFd * normal};
  for (int i = 0; i < 3; ++i) {
    Vec3 p = point + offsets[i];
    int v = snapVertex(p);
    Vec3 x = Vec3::Zero();
    x.head(dim) = mesh_->vertices.row(v);
    st.verts[i] = v;
    st.offsets[i] = (x - point).dot(normal);
    double tangential = ((x - point) - st.offsets[i] * normal).norm();
    st.tangentialError = std::max(st.tangentialError, tangential);
    if (!shellDprimeVertex_[v]) return st;  // stencil left the valid shell
  }
  if (st.verts[0] == st.verts[1] || st.verts[1] == st.verts[2]) return st;
  // Lagrange derivative weights at 0 for the snapped abscissae.
  for (int i = 0; i < 3; ++i) {
    double ti = st.offsets[i];
    double num = 0, den = 1;
    for (int j = 0; j < 3; ++j) {
      if (j == i) continue;
      den *= (ti - st.offsets[j]);
    }
    // d/dt prod_{j != i} (t - t_j) at t = 0 equals sum over pairs.
    double prodSum = 0;
    for (int j = 0; j < 3; ++j) {
      if (j == i) continue;
      double term = 1;
      for (int k = 0; k < 3; ++k) {
        if (k == i || k == j) continue;
        term *= (0.0 - st.offsets[k]);
      }
      prodSum += term;
    }
    num = prodSum;
    st.deriv[i] = num / den;
  }
  st.valid = true;
  return st;
}

SKernelSample SKernelEngine::normal_derivatives(const SurfaceQuadrature& quad,
                                                double hFd) {
  const int n = static_cast<int>(quad.points.rows());
  const int dim = mesh_->dim;
  double rho2 = mesh_->params.rho2, h = mesh_->params.h;
  if (!(hFd >= 2 * h && hFd <= rho2 / 4))
    fail("finite-difference step must lie in [2h, rho2/4]");

  std::vector<NormalStencil> st(n);
  for (int i = 0; i < n; ++i) {
    Vec3 p = Vec3::Zero(), nu = Vec3::Zero();
    p.head(dim) = quad.points.row(i);
    nu.head(dim) = quad.normals.row(i);
    st[i] = stencil(p, nu, hFd);
    if (!st[i].valid)
      fail("differencing stencil leaves the valid shell at sample " +
           std::to_string(i));
  }

  SKernelSample out;
  out.method = "direct";
  out.zPoints.resize(n, dim);
  out.wPoints.resize(n, dim);
  for (int i = 0; i < n; ++i) {
    out.zPoints.row(i) = mesh_->vertices.row(st[i].verts[1]);
    out.wPoints.row(i) = mesh_->vertices.row(st[i].verts[1]);
    out.zVerts.push_back(st[i].verts[1]);
    out.wVerts.push_back(st[i].verts[1]);
  }

  out.values.resize(n, n);
  out.dSdnuZ.resize(n, n);
  out.dSdnuW.resize(n, n);
  out.d2SdnuZdnuW.resize(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      // 3x3 tensor stencil values.
      double sv[3][3];
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          sv[a][b] = s_direct_vertices(st[j].verts[a], st[k].verts[b]);
      out.values(j, k) = sv[1][1];
      double dz = 0, dw = 0, dzw = 0;
      for (int a = 0; a < 3; ++a) {
        dz += st[j].deriv[a] * sv[a][1];
        dw += st[k].deriv[a] * sv[1][a];
        for (int b = 0; b < 3; ++b)
          dzw += st[j].deriv[a] * st[k].deriv[b] * sv[a][b];
      }
      out.dSdnuZ(j, k) = dz;
      out.dSdnuW(j, k) = dw;
      out.d2SdnuZdnuW(j, k) = dzw;
    }
  return out;
}

SKernelEngine::ResidualReport SKernelEngine::residual_impl(const VecX& sField,
                                                           const VecX& load) {
  // Assemble div(gamma0 grad .) over the shell outside closure(D); gamma1
  // equals gamma0 there by construction, so gamma1's coefficient is used.
  std::vector<int> shell = shell_outside_D(*mesh_);
  RegionSystem shellSys(*mesh_, *grads_, *gamma1_, shell);
  VecX local(shellSys.nodes().size());
  const auto& nodes = shellSys.nodes();
  for (size_t i = 0; i < nodes.size(); ++i) local[i] = sField[nodes[i]];
  VecX r = shellSys.applyK(local);
  ResidualReport rep;
  for (int l : shellSys.interiorLocal())
    rep.maxAbs = std::max(rep.maxAbs, std::abs(r[l]));
  rep.scale = std::max(load.cwiseAbs().maxCoeff(), 1e-300);
  rep.relative = rep.maxAbs / rep.scale;
  return rep;
}

SKernelEngine::ResidualReport SKernelEngine::elliptic_residual_in_z(int vw) {
  VecX sField = s_field_in_first(vw);
  // Reconstruct the load scale: the assembled pairing used in the solve.
  const VecX& g2 = supportGradients(1, vw);
  const int dim = mesh_->dim;
  VecX q = VecX::Zero(mesh_->numVertices());
  for (size_t i = 0; i < support_.size(); ++i) {
    int c = support_[i];
    Vec3 gw = Vec3::Zero();
    for (int d = 0; d < dim; ++d) gw[d] = g2[dim * i + d];
    for (int k = 0; k <= dim; ++k)
      q[mesh_->cells[c][k]] += supportWeight_[i] * grads_->cell(c).col(k).dot(gw);
  }
  return residual_impl(sField, q);
}

SKernelEngine::ResidualReport SKernelEngine::elliptic_residual_in_w(int vz) {
  VecX sField = s_field_in_second(vz);
  const VecX& g1 = supportGradients(0, vz);
  const int dim = mesh_->dim;
  VecX q = VecX::Zero(mesh_->numVertices());
  for (size_t i = 0; i < support_.size(); ++i) {
    int c = support_[i];
    Vec3 gz = Vec3::Zero();
    for (int d = 0; d < dim; ++d) gz[d] = g1[dim * i + d];
    for (int k = 0; k <= dim; ++k)
      q[mesh_->cells[c][k]] += supportWeight_[i] * grads_->cell(c).col(k).dot(gz);
  }
  return residual_impl(sField, q);
}

}  // namespace calderon

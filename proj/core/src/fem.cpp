#include "calderon/fem.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace calderon {

namespace {

[[noreturn]] void fail_solver(const std::string& msg) {
  throw ValidationError(ErrorKind::Solver, "solver", msg);
}

// Faces of the cell as sorted vertex triples (pairs in 2D).
std::array<int, 3> sorted_face(const std::array<int, 4>& c, int dim, int k) {
  std::array<int, 3> f{-1, -1, -1};
  int idx = 0;
  for (int i = 0; i <= dim; ++i)
    if (i != k) f[idx++] = c[i];
  std::sort(f.begin(), f.begin() + dim);
  return f;
}

struct FaceHash {
  size_t operator()(const std::array<int, 3>& f) const {
    size_t h = 1469598103934665603ull;
    for (int x : f) {
      h ^= static_cast<size_t>(x) + 0x9e3779b97f4a7c15ull;
      h *= 1099511628211ull;
    }
    return h;
  }
};

}  // namespace

MeshGradients::MeshGradients(const MeshedDomain& mesh) : mesh_(&mesh) {
  const int dim = mesh.dim;
  grads_.resize(mesh.numCells());
  for (int c = 0; c < mesh.numCells(); ++c) {
    Eigen::Matrix<double, 3, 4> g = Eigen::Matrix<double, 3, 4>::Zero();
    const auto& cell = mesh.cells[c];
    if (dim == 2) {
      Eigen::Matrix2d J;
      Eigen::Vector2d a = mesh.vertices.row(cell[0]).head<2>();
      J.col(0) = mesh.vertices.row(cell[1]).transpose().head<2>() - a;
      J.col(1) = mesh.vertices.row(cell[2]).transpose().head<2>() - a;
      Eigen::Matrix2d Jit = J.inverse().transpose();
      g.block<2, 1>(0, 1) = Jit.col(0);
      g.block<2, 1>(0, 2) = Jit.col(1);
      g.block<2, 1>(0, 0) = -Jit.col(0) - Jit.col(1);
    } else {
      Eigen::Matrix3d J;
      Eigen::Vector3d a = mesh.vertices.row(cell[0]);
      for (int k = 0; k < 3; ++k)
        J.col(k) = mesh.vertices.row(cell[k + 1]).transpose() - a;
      Eigen::Matrix3d Jit = J.inverse().transpose();
      for (int k = 0; k < 3; ++k) g.block<3, 1>(0, k + 1) = Jit.col(k);
      g.block<3, 1>(0, 0) = -(Jit.col(0) + Jit.col(1) + Jit.col(2));
    }
    grads_[c] = g;
  }
}

Vec3 MeshGradients::gradient(int c, const VecX& nodal) const {
  const auto& cell = mesh_->cells[c];
  Vec3 g = Vec3::Zero();
  for (int k = 0; k <= mesh_->dim; ++k)
    g += grads_[c].col(k) * nodal[cell[k]];
  return g;
}

RegionSystem::RegionSystem(const MeshedDomain& mesh, const MeshGradients& grads,
                           const ConductivityField& gamma,
                           std::vector<int> cellSet, SolverOptions opts)
    : mesh_(&mesh), gamma_(&gamma), opts_(opts), cells_(std::move(cellSet)) {
  const int dim = mesh.dim;
  if (cells_.empty()) fail_solver("empty solve region");

  // Local numbering.
  g2l_.assign(mesh.numVertices(), -1);
  for (int c : cells_)
    for (int k = 0; k <= dim; ++k) {
      int v = mesh.cells[c][k];
      if (g2l_[v] < 0) {
        g2l_[v] = 0;
        nodes_.push_back(v);
      }
    }
  std::sort(nodes_.begin(), nodes_.end());
  for (size_t i = 0; i < nodes_.size(); ++i) g2l_[nodes_[i]] = static_cast<int>(i);
  const int n = static_cast<int>(nodes_.size());

  // Boundary nodes: vertices of faces adjacent to exactly one cell of the set.
  std::unordered_map<std::array<int, 3>, int, FaceHash> faceCount;
  for (int c : cells_) {
    if (mesh.cellVolume[c] <= 1e-300)
      fail_solver("degenerate element " + std::to_string(c));
    for (int k = 0; k <= dim; ++k) faceCount[sorted_face(mesh.cells[c], dim, k)]++;
  }
  isBoundary_.assign(n, 0);
  for (const auto& [f, cnt] : faceCount)
    if (cnt == 1)
      for (int k = 0; k < dim; ++k) isBoundary_[g2l_[f[k]]] = 1;
  for (int l = 0; l < n; ++l)
    (isBoundary_[l] ? boundary_ : interior_).push_back(l);
  localToInterior_.assign(n, -1);
  for (size_t i = 0; i < interior_.size(); ++i) localToInterior_[interior_[i]] = i;

  // P1 stiffness with the cellwise vertex-average coefficient.
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(cells_.size() * (dim + 1) * (dim + 1));
  for (int c : cells_) {
    const auto& cell = mesh.cells[c];
    double coef = gamma.onCell(c) * mesh.cellVolume[c];
    const auto& g = grads.cell(c);
    for (int i = 0; i <= dim; ++i)
      for (int j = 0; j <= dim; ++j) {
        double kij = coef * g.col(i).dot(g.col(j));
        trip.emplace_back(g2l_[cell[i]], g2l_[cell[j]], kij);
      }
  }
  K_.resize(n, n);
  K_.setFromTriplets(trip.begin(), trip.end());

  // Interior block and coupling.
  const int ni = static_cast<int>(interior_.size());
  const int nb = static_cast<int>(boundary_.size());
  std::vector<int> localToBoundary(n, -1);
  for (int i = 0; i < nb; ++i) localToBoundary[boundary_[i]] = i;
  std::vector<Eigen::Triplet<double>> tii, tib;
  for (int col = 0; col < K_.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(K_, col); it; ++it) {
      int r = static_cast<int>(it.row()), cc = static_cast<int>(it.col());
      if (!isBoundary_[r] && !isBoundary_[cc])
        tii.emplace_back(localToInterior_[r], localToInterior_[cc], it.value());
      else if (!isBoundary_[r] && isBoundary_[cc])
        tib.emplace_back(localToInterior_[r], localToBoundary[cc], it.value());
    }
  Kii_.resize(ni, ni);
  Kii_.setFromTriplets(tii.begin(), tii.end());
  Kib_.resize(ni, nb);
  Kib_.setFromTriplets(tib.begin(), tib.end());

  useDirect_ = ni <= opts_.directMaxUnknowns;
}

VecX RegionSystem::solveInterior(const VecX& rhs, double* residual) const {
  const int ni = static_cast<int>(interior_.size());
  if (ni == 0) {
    if (residual) *residual = 0;
    return VecX();
  }
  VecX x;
  if (useDirect_) {
    std::call_once(factorOnce_, [this] {
      ldlt_ = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
      ldlt_->compute(Kii_);
      if (ldlt_->info() != Eigen::Success)
        fail_solver("interior-block factorization failed");
    });
    x = ldlt_->solve(rhs);
  } else {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>,
                             Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    cg.setTolerance(opts_.tol);
    cg.setMaxIterations(opts_.maxIter);
    cg.compute(Kii_);
    x = cg.solve(rhs);
    if (cg.info() != Eigen::Success)
      fail_solver("conjugate gradient did not converge within " +
                  std::to_string(opts_.maxIter) + " iterations, residual " +
                  std::to_string(cg.error()));
  }
  if (residual) {
    double denom = std::max(1e-300, rhs.norm());
    *residual = (Kii_ * x - rhs).norm() / denom;
  }
  return x;
}

VecX RegionSystem::solveDirichletLocal(const VecX& boundaryData,
                                       double* residual) const {
  const int n = static_cast<int>(nodes_.size());
  VecX rhs = -(Kib_ * boundaryData);
  VecX xi = solveInterior(rhs, residual);
  VecX out(n);
  for (size_t i = 0; i < interior_.size(); ++i) out[interior_[i]] = xi[i];
  for (size_t i = 0; i < boundary_.size(); ++i) out[boundary_[i]] = boundaryData[i];
  return out;
}

VecX RegionSystem::solveDirichletGlobal(const VecX& globalData,
                                        double* residual) const {
  VecX bd(boundary_.size());
  for (size_t i = 0; i < boundary_.size(); ++i)
    bd[i] = globalData[nodes_[boundary_[i]]];
  return solveDirichletLocal(bd, residual);
}

VecX RegionSystem::solveLoadLocal(const VecX& loadLocal, double* residual) const {
  VecX rhs(interior_.size());
  for (size_t i = 0; i < interior_.size(); ++i) rhs[i] = loadLocal[interior_[i]];
  VecX xi = solveInterior(rhs, residual);
  VecX out = VecX::Zero(nodes_.size());
  for (size_t i = 0; i < interior_.size(); ++i) out[interior_[i]] = xi[i];
  return out;
}

VecX FieldSolution::scatter(int numVertices) const {
  VecX out = VecX::Zero(numVertices);
  const auto& nodes = system->nodes();
  for (size_t i = 0; i < nodes.size(); ++i) out[nodes[i]] = local[i];
  return out;
}

FieldSolution solve_dirichlet(const RegionSystem& sys, const VecX& globalBoundaryData) {
  FieldSolution s;
  s.system = &sys;
  s.local = sys.solveDirichletGlobal(globalBoundaryData, &s.residualNorm);
  return s;
}

GreensFunction greens_function_at_vertex(const RegionSystem& sysFull, int vertex) {
  int l = sysFull.localIndex(vertex);
  if (l < 0) fail_solver("Green source vertex outside the solve region");
  if (sysFull.isBoundaryLocal(l))
    throw ValidationError(ErrorKind::Solver, "greens_function",
                          "source point lies on the outer boundary");
  VecX load = VecX::Zero(sysFull.nodes().size());
  load[l] = 1.0;
  GreensFunction g;
  g.sourceVertex = vertex;
  g.snapDistance = 0;
  VecX local = sysFull.solveLoadLocal(load, nullptr);
  g.values = VecX::Zero(sysFull.mesh().numVertices());
  const auto& nodes = sysFull.nodes();
  for (size_t i = 0; i < nodes.size(); ++i) g.values[nodes[i]] = local[i];
  return g;
}

GreensFunction greens_function(const RegionSystem& sysFull, const Vec3& y) {
  const MeshedDomain& mesh = sysFull.mesh();
  int v = nearest_vertex(mesh, y.head(mesh.dim));
  GreensFunction g = greens_function_at_vertex(sysFull, v);
  Vec3 x = Vec3::Zero();
  x.head(mesh.dim) = mesh.vertices.row(v);
  g.snapDistance = (x - y).norm();
  return g;
}

double energy_annulus(const MeshGradients& grads, const VecX& globalValues,
                      const Vec3& y, double r) {
  const MeshedDomain& mesh = grads.mesh();
  const int dim = mesh.dim;
  double energy = 0;
  const double r2 = r * r;
  for (int c = 0; c < mesh.numCells(); ++c) {
    // Cheap bounds via the barycenter and cell size.
    Vec3 bary = Vec3::Zero();
    bary.head(dim) = mesh.cellBarycenter.row(c);
    double dist = (bary - y).norm();
    double halfDiam = 0;
    for (int k = 0; k <= dim; ++k) {
      Vec3 vv = Vec3::Zero();
      vv.head(dim) = mesh.vertices.row(mesh.cells[c][k]);
      halfDiam = std::max(halfDiam, (vv - bary).norm());
    }
    double frac;
    if (dist - halfDiam >= r) {
      frac = 1.0;
    } else if (dist + halfDiam <= r) {
      continue;
    } else {
      // Subcell fractions: equal-volume red-refinement barycenters.
      const auto& cell = mesh.cells[c];
      int outside = 0, total = 0;
      auto vtx = [&](int k) {
        Vec3 vv = Vec3::Zero();
        vv.head(dim) = mesh.vertices.row(cell[k]);
        return vv;
      };
      if (dim == 2) {
        Vec3 a = vtx(0), b = vtx(1), cc = vtx(2);
        Vec3 mab = 0.5 * (a + b), mbc = 0.5 * (b + cc), mca = 0.5 * (cc + a);
        const Vec3 sub[4] = {(a + mab + mca) / 3, (mab + b + mbc) / 3,
                             (mca + mbc + cc) / 3, (mab + mbc + mca) / 3};
        for (const Vec3& p : sub) {
          total++;
          if ((p - y).squaredNorm() > r2) outside++;
        }
      } else {
        Vec3 a = vtx(0), b = vtx(1), cc = vtx(2), d = vtx(3);
        Vec3 center = (a + b + cc + d) / 4;
        // Four corner subtets (volume 1/8 each) plus the central
        // octahedron (volume 1/2) sampled at its center.
        std::array<std::pair<Vec3, int>, 5> samples = {
            std::make_pair((5 * a + b + cc + d) / 8, 1),
            std::make_pair((a + 5 * b + cc + d) / 8, 1),
            std::make_pair((a + b + 5 * cc + d) / 8, 1),
            std::make_pair((a + b + cc + 5 * d) / 8, 1),
            std::make_pair(center, 4)};
        for (const auto& [p, w] : samples) {
          total += w;
          if ((p - y).squaredNorm() > r2) outside += w;
        }
      }
      frac = static_cast<double>(outside) / total;
      if (frac == 0) continue;
    }
    Vec3 g = grads.gradient(c, globalValues);
    energy += frac * mesh.cellVolume[c] * g.squaredNorm();
  }
  return energy;
}

BoundaryFlux conormal_flux(const RegionSystem& sys, const FieldSolution& u) {
  VecX r = sys.applyK(u.local);
  BoundaryFlux out;
  const auto& nodes = sys.nodes();
  for (int l : sys.boundaryLocal()) out.nodes.push_back(nodes[l]);
  out.coeffs.resize(out.nodes.size());
  int idx = 0;
  for (int l : sys.boundaryLocal()) out.coeffs[idx++] = r[l];
  return out;
}

void boundary_mass_stiffness(const MeshedDomain& mesh,
                             const std::vector<int>& facetIds,
                             const std::vector<int>& vertexIds,
                             Eigen::SparseMatrix<double>& mass,
                             Eigen::SparseMatrix<double>& stiffness) {
  const int n = static_cast<int>(vertexIds.size());
  std::unordered_map<int, int> g2l;
  for (int i = 0; i < n; ++i) g2l[vertexIds[i]] = i;

  std::vector<Eigen::Triplet<double>> tm, tk;
  for (int f : facetIds) {
    const auto& fa = mesh.facets[f];
    double meas = mesh.facetMeasure(f);
    if (mesh.dim == 2) {
      int a = fa.v[0], b = fa.v[1];
      auto ia = g2l.find(a), ib = g2l.find(b);
      double m11 = meas / 3, m12 = meas / 6;
      double k11 = 1.0 / meas;
      if (ia != g2l.end()) {
        tm.emplace_back(ia->second, ia->second, m11);
        tk.emplace_back(ia->second, ia->second, k11);
      }
      if (ib != g2l.end()) {
        tm.emplace_back(ib->second, ib->second, m11);
        tk.emplace_back(ib->second, ib->second, k11);
      }
      if (ia != g2l.end() && ib != g2l.end()) {
        tm.emplace_back(ia->second, ib->second, m12);
        tm.emplace_back(ib->second, ia->second, m12);
        tk.emplace_back(ia->second, ib->second, -k11);
        tk.emplace_back(ib->second, ia->second, -k11);
      }
    } else {
      // Surface P1 triangle: consistent mass and cotangent stiffness.
      Eigen::Vector3d p[3];
      for (int k = 0; k < 3; ++k) p[k] = mesh.vertices.row(fa.v[k]);
      int loc[3];
      for (int k = 0; k < 3; ++k) {
        auto it = g2l.find(fa.v[k]);
        loc[k] = (it == g2l.end()) ? -1 : it->second;
      }
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          if (loc[i] < 0 || loc[j] < 0) continue;
          tm.emplace_back(loc[i], loc[j], meas * (i == j ? 1.0 / 6 : 1.0 / 12));
        }
      for (int i = 0; i < 3; ++i) {
        int j = (i + 1) % 3, k = (i + 2) % 3;
        Eigen::Vector3d e1 = p[j] - p[i], e2 = p[k] - p[i];
        double cot = e1.dot(e2) / e1.cross(e2).norm();
        // Off-diagonal contribution -cot(angle_i)/2 between j and k.
        if (loc[j] >= 0 && loc[k] >= 0) {
          tk.emplace_back(loc[j], loc[k], -0.5 * cot);
          tk.emplace_back(loc[k], loc[j], -0.5 * cot);
        }
        if (loc[j] >= 0) tk.emplace_back(loc[j], loc[j], 0.5 * cot);
        if (loc[k] >= 0) tk.emplace_back(loc[k], loc[k], 0.5 * cot);
      }
    }
  }
  mass.resize(n, n);
  mass.setFromTriplets(tm.begin(), tm.end());
  stiffness.resize(n, n);
  stiffness.setFromTriplets(tk.begin(), tk.end());
}

VecX flux_density(const MeshedDomain& mesh, const std::vector<int>& facetIds,
                  const BoundaryFlux& flux) {
  std::vector<int> verts = mesh.facetVertices(facetIds);
  Eigen::SparseMatrix<double> M, K;
  boundary_mass_stiffness(mesh, facetIds, verts, M, K);
  std::unordered_map<int, int> g2l;
  for (size_t i = 0; i < verts.size(); ++i) g2l[verts[i]] = static_cast<int>(i);
  VecX rhs = VecX::Zero(verts.size());
  for (size_t i = 0; i < flux.nodes.size(); ++i) {
    auto it = g2l.find(flux.nodes[i]);
    if (it != g2l.end()) rhs[it->second] = flux.coeffs[i];
  }
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(M);
  if (ldlt.info() != Eigen::Success) fail_solver("boundary mass factorization failed");
  return ldlt.solve(rhs);
}

double l2_norm_on_cells(const MeshedDomain& mesh, const std::vector<int>& cellSet,
                        const VecX& globalValues) {
  double s = 0;
  const int dim = mesh.dim;
  for (int c : cellSet) {
    const auto& cell = mesh.cells[c];
    // Consistent P1 mass: vol/((d+1)(d+2)) * (sum_i v_i^2 + (sum_i v_i)^2).
    double sq = 0, sum = 0;
    for (int k = 0; k <= dim; ++k) {
      double v = globalValues[cell[k]];
      sq += v * v;
      sum += v;
    }
    s += mesh.cellVolume[c] / ((dim + 1) * (dim + 2)) * (sq + sum * sum);
  }
  return std::sqrt(s);
}

}  // namespace calderon

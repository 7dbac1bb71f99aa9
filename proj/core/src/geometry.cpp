#include "calderon/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <queue>
#include <sstream>
#include <unordered_map>

namespace calderon {

namespace {

constexpr double kPi = std::numbers::pi;

[[noreturn]] void fail_geometry(const std::string& key, const std::string& msg) {
  throw ValidationError(ErrorKind::Geometry, key, msg);
}

double wrap_angle(double t) {
  while (t < 0) t += 2 * kPi;
  while (t >= 2 * kPi) t -= 2 * kPi;
  return t;
}

// Distance from a point to the radial edge segment {angle theta, r in [a,b]}.
double dist_to_radial_edge(const Eigen::Vector2d& p, double theta, double a,
                           double b) {
  Eigen::Vector2d u(std::cos(theta), std::sin(theta));
  double t = std::clamp(p.dot(u), a, b);
  return (p - t * u).norm();
}

struct EdgeKey {
  std::array<int, 3> v;
  bool operator==(const EdgeKey& o) const { return v == o.v; }
};
struct EdgeKeyHash {
  size_t operator()(const EdgeKey& k) const {
    size_t h = 1469598103934665603ull;
    for (int x : k.v) {
      h ^= static_cast<size_t>(x) + 0x9e3779b97f4a7c15ull;
      h *= 1099511628211ull;
    }
    return h;
  }
};

EdgeKey face_key(std::array<int, 3> v) {
  // 2D faces carry -1 in the last slot; keep it there.
  if (v[2] == -1) {
    if (v[0] > v[1]) std::swap(v[0], v[1]);
  } else {
    std::sort(v.begin(), v.end());
  }
  return EdgeKey{v};
}

// Faces of a simplex, each as a sorted key plus the original orientation.
std::vector<std::array<int, 3>> cell_faces(const std::array<int, 4>& c, int dim) {
  if (dim == 2) {
    return {{c[0], c[1], -1}, {c[1], c[2], -1}, {c[2], c[0], -1}};
  }
  return {{c[0], c[1], c[2]}, {c[0], c[1], c[3]}, {c[0], c[2], c[3]},
          {c[1], c[2], c[3]}};
}

double simplex_volume(const MatX& verts, const std::array<int, 4>& c, int dim) {
  if (dim == 2) {
    Eigen::Vector2d a = verts.row(c[0]).head<2>();
    Eigen::Vector2d b = verts.row(c[1]).head<2>();
    Eigen::Vector2d d = verts.row(c[2]).head<2>();
    return 0.5 * ((b - a).x() * (d - a).y() - (b - a).y() * (d - a).x());
  }
  Eigen::Vector3d a = verts.row(c[0]);
  Eigen::Vector3d b = verts.row(c[1]);
  Eigen::Vector3d d = verts.row(c[2]);
  Eigen::Vector3d e = verts.row(c[3]);
  return (b - a).cross(d - a).dot(e - a) / 6.0;
}

// A family-specific callback deciding the tag of an outer-boundary facet.
using BoundaryClassifier = std::function<Boundary(const Vec3& centroid)>;

Boundary interface_tag(Region a, Region b, int f) {
  auto lo = std::min(a, b), hi = std::max(a, b);
  if (lo == Region::A && hi == Region::OmegaMinusDtilde) return Boundary::Sigma0;
  if (lo == Region::OmegaMinusDtilde && hi == Region::DtildeMinusDprime)
    return Boundary::dDtilde;
  if (lo == Region::DtildeMinusDprime && hi == Region::DprimeMinusD)
    return Boundary::dDprime;
  if (lo == Region::DprimeMinusD && hi == Region::D) return Boundary::dD;
  std::ostringstream os;
  os << "regions " << to_string(a) << " and " << to_string(b)
     << " touch across facet " << f
     << "; a scaffold shell is thinner than the mesh size";
  fail_geometry("geometry.h", os.str());
}

// Nesting order used to decide which side of an interface is enclosed.
int depth(Region r) { return static_cast<int>(r); }

void finalize_mesh(MeshedDomain& m, const BoundaryClassifier& classify) {
  const int dim = m.dim;
  const int nc = m.numCells();

  // Orient cells positively and compute volumes / barycenters.
  m.cellVolume.resize(nc);
  m.cellBarycenter.resize(nc, dim);
  for (int c = 0; c < nc; ++c) {
    double vol = simplex_volume(m.vertices, m.cells[c], dim);
    if (vol < 0) {
      std::swap(m.cells[c][0], m.cells[c][1]);
      vol = -vol;
    }
    m.cellVolume[c] = vol;
    Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(dim);
    for (int k = 0; k <= dim; ++k) b += m.vertices.row(m.cells[c][k]);
    m.cellBarycenter.row(c) = b / (dim + 1);
  }

  // Face scan: boundary faces and region interfaces become tagged facets.
  std::unordered_map<EdgeKey, std::pair<int, int>, EdgeKeyHash> faces;
  faces.reserve(nc * (dim + 1));
  for (int c = 0; c < nc; ++c) {
    for (auto& f : cell_faces(m.cells[c], dim)) {
      auto key = face_key(f);
      auto it = faces.find(key);
      if (it == faces.end())
        faces.emplace(key, std::make_pair(c, -1));
      else
        it->second.second = c;
    }
  }

  m.facets.clear();
  for (auto& [key, cc] : faces) {
    auto [c0, c1] = cc;
    MeshedDomain::Facet fa;
    fa.v = key.v;
    if (c1 < 0) {
      fa.cellInner = c0;
      fa.cellOuter = -1;
      Vec3 ctr = Vec3::Zero();
      for (int k = 0; k < dim; ++k) ctr.head(dim) += m.vertices.row(fa.v[k]);
      ctr /= dim;
      fa.tag = classify(ctr);
      m.facets.push_back(fa);
    } else if (m.cellRegion[c0] != m.cellRegion[c1]) {
      Region r0 = m.cellRegion[c0], r1 = m.cellRegion[c1];
      fa.tag = interface_tag(r0, r1, static_cast<int>(m.facets.size()));
      // Enclosed side is the deeper region, except at Sigma0 where the
      // enclosed side is Omega (normals point out of Omega into A).
      bool c0Inner = depth(r0) > depth(r1);
      if (fa.tag == Boundary::Sigma0) c0Inner = (r0 != Region::A);
      fa.cellInner = c0Inner ? c0 : c1;
      fa.cellOuter = c0Inner ? c1 : c0;
      m.facets.push_back(fa);
    }
  }
}

//---------------------------------------------------------------------------
// 2D polar meshes (disk and annulus-sector families).
//
// The mesh is a structured polar grid: rings at radii that hit the scaffold
// circles exactly and a uniform angular subdivision whose node lines hit
// the Sigma / Sigma0 arc endpoints exactly.  All circle interfaces are
// therefore exact node polygons, uniform per ring.
//---------------------------------------------------------------------------

std::vector<double> subdivide(const std::vector<double>& breakpoints, double h) {
  std::vector<double> r;
  r.push_back(breakpoints.front());
  for (size_t s = 0; s + 1 < breakpoints.size(); ++s) {
    double a = breakpoints[s], b = breakpoints[s + 1];
    int n = std::max(1, static_cast<int>(std::ceil((b - a) / h - 1e-12)));
    for (int i = 1; i <= n; ++i) r.push_back(a + (b - a) * i / n);
  }
  return r;
}

MeshedDomain build_polar_2d(const GeometryParams& p) {
  MeshedDomain m;
  m.dim = 2;
  m.params = p;

  const double R = p.omegaRadius;
  const double T = p.bulgeThickness;
  const double Rin = (p.family == Family::AnnulusSector) ? p.annulusInnerRadius : 0.0;
  const bool fullCircle = (p.family == Family::Disk);
  const double span = fullCircle ? 2 * kPi : 2 * p.sigmaCenter;

  // Angular grid: multiple of 8 divisions of the full span so that the
  // Sigma and Sigma0 endpoints (quarters of the accessible arc) are node
  // lines; outermost arc length bounded by h.
  int nTheta = 8 * std::max(2, static_cast<int>(std::ceil(span * (R + T) / (8 * p.h))));
  const double dTheta = span / nTheta;

  const double thA = p.sigmaCenter - p.sigmaHalfWidth;  // Sigma start
  const double thB = p.sigmaCenter + p.sigmaHalfWidth;
  const double th0A = p.sigmaCenter - 0.5 * p.sigmaHalfWidth;  // Sigma0
  const double th0B = p.sigmaCenter + 0.5 * p.sigmaHalfWidth;
  auto snap = [&](double t) { return std::round(t / dTheta) * dTheta; };
  const double sA = snap(thA), sB = snap(thB), s0A = snap(th0A), s0B = snap(th0B);

  std::vector<double> breaks = {Rin, p.scaffoldR[0], p.scaffoldR[1],
                                p.scaffoldR[2], R, R + T};
  if (Rin > 0) {
    // Scaffold circles are centered at the sector midpoint and realized
    // by barycenter tagging; radial breakpoints only at Rin, R, R+T.
    breaks = {Rin, R, R + T};
  }
  std::vector<double> radii = subdivide(breaks, p.h);
  const int nR = static_cast<int>(radii.size());  // radii[0] == Rin

  int ringOfR = -1;
  for (int i = 0; i < nR; ++i)
    if (std::abs(radii[i] - R) < 1e-14) ringOfR = i;
  if (ringOfR < 0) fail_geometry("geometry", "outer radius missed a ring");

  auto inBulgeArc = [&](double th) { return th > s0A - 1e-12 && th < s0B + 1e-12; };

  // Node numbering: optional hub node 0 (disk), then ring-major.
  std::vector<std::vector<int>> ringNode(nR, std::vector<int>(nTheta + 1, -1));
  std::vector<Eigen::Vector2d> verts;
  const int nThetaNodes = fullCircle ? nTheta : nTheta + 1;
  int hub = -1;
  if (Rin == 0.0) {
    hub = 0;
    verts.push_back({0.0, 0.0});
  }
  for (int i = (Rin == 0.0 ? 1 : 0); i < nR; ++i) {
    bool bulgeRing = radii[i] > R + 1e-14;
    for (int j = 0; j < nThetaNodes; ++j) {
      double th = j * dTheta;
      if (bulgeRing && !inBulgeArc(th)) continue;
      ringNode[i][j] = static_cast<int>(verts.size());
      verts.push_back({radii[i] * std::cos(th), radii[i] * std::sin(th)});
    }
  }
  auto node = [&](int i, int j) {
    int jj = fullCircle ? (j % nTheta) : j;
    return ringNode[i][jj];
  };

  auto regionOfRadius = [&](double r, const Eigen::Vector2d& bary) {
    if (r > R + 1e-14) return Region::A;
    if (Rin > 0) {
      // Annulus-sector: concentric circular scaffold at the sector
      // midpoint, tagged by barycenter.
      Eigen::Vector2d c = 0.5 * (Rin + R) *
                          Eigen::Vector2d(std::cos(p.sigmaCenter),
                                          std::sin(p.sigmaCenter));
      double d = (bary - c).norm();
      if (d < p.scaffoldR[0]) return Region::D;
      if (d < p.scaffoldR[1]) return Region::DprimeMinusD;
      if (d < p.scaffoldR[2]) return Region::DtildeMinusDprime;
      return Region::OmegaMinusDtilde;
    }
    if (r < p.scaffoldR[0]) return Region::D;
    if (r < p.scaffoldR[1]) return Region::DprimeMinusD;
    if (r < p.scaffoldR[2]) return Region::DtildeMinusDprime;
    return Region::OmegaMinusDtilde;
  };

  auto pushCell = [&](int a, int b, int c) {
    m.cells.push_back({a, b, c, -1});
  };

  // Hub fan (disk family only; the annulus sector has no center node).
  if (hub == 0) {
    for (int j = 0; j < nTheta; ++j) {
      int b = node(1, j), c = node(1, j + 1);
      if (b < 0 || c < 0) continue;
      pushCell(hub, b, c);
    }
  }

  const int firstBand = (Rin == 0.0) ? 1 : 0;
  for (int i = firstBand; i + 1 < nR; ++i) {
    bool bulgeBand = radii[i] > R - 1e-14 && radii[i + 1] > R + 1e-14;
    for (int j = 0; j < nTheta; ++j) {
      double thMid = (j + 0.5) * dTheta;
      if (bulgeBand && !(thMid > s0A && thMid < s0B)) continue;
      int a = node(i, j), b = node(i + 1, j), c = node(i + 1, j + 1),
          d = node(i, j + 1);
      if (a < 0 || b < 0 || c < 0 || d < 0) continue;
      pushCell(a, b, c);
      pushCell(a, c, d);
    }
  }

  m.vertices.resize(static_cast<int>(verts.size()), 2);
  for (size_t i = 0; i < verts.size(); ++i) m.vertices.row(i) = verts[i];

  m.cellRegion.resize(m.cells.size());
  for (size_t c = 0; c < m.cells.size(); ++c) {
    Eigen::Vector2d bary = Eigen::Vector2d::Zero();
    for (int k = 0; k < 3; ++k) bary += verts[m.cells[c][k]];
    bary /= 3.0;
    m.cellRegion[c] = regionOfRadius(bary.norm(), bary);
  }

  // Marked point: parametric center of the attachment.
  double qr = R + 0.5 * T;
  m.markedPoint = Vec3(qr * std::cos(p.sigmaCenter), qr * std::sin(p.sigmaCenter), 0);

  Eigen::Vector2d q2 = m.markedPoint.head<2>();
  double distQ = std::min({0.5 * T, dist_to_radial_edge(q2, s0A, R, R + T),
                           dist_to_radial_edge(q2, s0B, R, R + T)});
  m.rho1Derived = 0.5 * (distQ - p.h);

  auto classify = [&, sA, sB, s0A, s0B](const Vec3& ctr) {
    double r = ctr.head<2>().norm();
    double th = wrap_angle(std::atan2(ctr.y(), ctr.x()));
    if (std::abs(r - R) < 0.25 * p.h && th > sA && th < sB &&
        !(th > s0A && th < s0B))
      return Boundary::Sigma;
    return Boundary::OuterRest;
  };
  finalize_mesh(m, classify);
  return m;
}

//---------------------------------------------------------------------------
// 3D lattice meshes (ball and box families).
//
// Tetrahedra come from the Kuhn subdivision of a uniform cube lattice;
// cells are kept when their barycenter lies in the augmented domain and
// tagged by barycenter.  Curved interfaces are therefore staircase
// surfaces at mesh scale; box-family scaffold interfaces are exact
// lattice planes.
//---------------------------------------------------------------------------

constexpr int kKuhn[6][4][3] = {
    {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {1, 1, 1}},
    {{0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {1, 1, 1}},
    {{0, 0, 0}, {0, 1, 0}, {1, 1, 0}, {1, 1, 1}},
    {{0, 0, 0}, {0, 1, 0}, {0, 1, 1}, {1, 1, 1}},
    {{0, 0, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}},
    {{0, 0, 0}, {0, 0, 1}, {0, 1, 1}, {1, 1, 1}},
};

struct LatticeBuilder {
  Eigen::Vector3d origin;
  double h;
  int nx, ny, nz;
  std::unordered_map<long long, int> vertexId;
  std::vector<Eigen::Vector3d> verts;

  long long key(int i, int j, int k) const {
    return (static_cast<long long>(i) * (ny + 2) + j) * (nz + 2) + k;
  }
  int vertex(int i, int j, int k) {
    long long kk = key(i, j, k);
    auto it = vertexId.find(kk);
    if (it != vertexId.end()) return it->second;
    int id = static_cast<int>(verts.size());
    verts.push_back(origin + h * Eigen::Vector3d(i, j, k));
    vertexId.emplace(kk, id);
    return id;
  }
};

MeshedDomain build_lattice_3d(const GeometryParams& p) {
  MeshedDomain m;
  m.dim = 3;
  m.params = p;

  const bool ball = (p.family == Family::Ball);
  const double R = p.omegaRadius;
  const double L = p.boxSize;
  const double T = p.bulgeThickness;
  const double th0 = 0.5 * p.sigmaHalfWidth;  // Sigma0 cap half-angle

  Eigen::Vector3d lo, hi;
  if (ball) {
    lo = Eigen::Vector3d(-R, -R, -R);
    hi = Eigen::Vector3d(R, R, R + T);
  } else {
    lo = Eigen::Vector3d(0, 0, 0);
    hi = Eigen::Vector3d(L, L, L + T);
  }

  LatticeBuilder lat;
  lat.h = p.h;
  // Snap so that box faces and box-family scaffold planes are lattice planes.
  if (!ball) lat.h = L / std::max(1.0, std::round(L / p.h));
  lat.origin = lo;
  lat.nx = static_cast<int>(std::ceil((hi.x() - lo.x()) / lat.h)) + 1;
  lat.ny = static_cast<int>(std::ceil((hi.y() - lo.y()) / lat.h)) + 1;
  lat.nz = static_cast<int>(std::ceil((hi.z() - lo.z()) / lat.h)) + 1;

  Eigen::Vector3d boxCenter(L / 2, L / 2, L / 2);
  const double capBase = (ball ? 0.0 : T);  // box bulge: half-ball radius
  Eigen::Vector3d capCenter(L / 2, L / 2, L);

  auto insideDomain = [&](const Eigen::Vector3d& x) {
    if (ball) {
      double r = x.norm();
      if (r < R) return true;
      if (r < R + T) {
        double polar = std::acos(std::clamp(x.z() / std::max(r, 1e-300), -1.0, 1.0));
        return polar < th0;
      }
      return false;
    }
    if (x.x() > 0 && x.x() < L && x.y() > 0 && x.y() < L && x.z() > 0 && x.z() < L)
      return true;
    if (x.z() >= L && (x - capCenter).norm() < capBase) return true;
    return false;
  };
  auto regionOf = [&](const Eigen::Vector3d& x) {
    if (ball) {
      double r = x.norm();
      if (r >= R) return Region::A;
      if (r < p.scaffoldR[0]) return Region::D;
      if (r < p.scaffoldR[1]) return Region::DprimeMinusD;
      if (r < p.scaffoldR[2]) return Region::DtildeMinusDprime;
      return Region::OmegaMinusDtilde;
    }
    if (x.z() >= L) return Region::A;
    double d = (x - boxCenter).lpNorm<Eigen::Infinity>();
    if (d < p.scaffoldR[0]) return Region::D;
    if (d < p.scaffoldR[1]) return Region::DprimeMinusD;
    if (d < p.scaffoldR[2]) return Region::DtildeMinusDprime;
    return Region::OmegaMinusDtilde;
  };

  for (int i = 0; i + 1 <= lat.nx; ++i)
    for (int j = 0; j + 1 <= lat.ny; ++j)
      for (int k = 0; k + 1 <= lat.nz; ++k) {
        Eigen::Vector3d corner = lat.origin + lat.h * Eigen::Vector3d(i, j, k);
        // Quick reject: cube far outside the domain.
        Eigen::Vector3d cc = corner + 0.5 * lat.h * Eigen::Vector3d::Ones();
        if (ball && cc.norm() > R + T + lat.h) continue;
        for (auto& tet : kKuhn) {
          Eigen::Vector3d bary = Eigen::Vector3d::Zero();
          for (auto& d : tet)
            bary += corner + lat.h * Eigen::Vector3d(d[0], d[1], d[2]);
          bary /= 4.0;
          if (!insideDomain(bary)) continue;
          std::array<int, 4> cell;
          for (int t = 0; t < 4; ++t)
            cell[t] = lat.vertex(i + tet[t][0], j + tet[t][1], k + tet[t][2]);
          m.cells.push_back(cell);
          m.cellRegion.push_back(regionOf(bary));
        }
      }

  m.vertices.resize(static_cast<int>(lat.verts.size()), 3);
  for (size_t i = 0; i < lat.verts.size(); ++i) m.vertices.row(i) = lat.verts[i];

  double distQ;
  if (ball) {
    m.markedPoint = Vec3(0, 0, R + 0.5 * T);
    double lateral = (R + 0.5 * T) * std::sin(th0);
    distQ = std::min(0.5 * T, lateral);
  } else {
    m.markedPoint = Vec3(L / 2, L / 2, L + 0.375 * capBase);
    distQ = std::min(0.375 * capBase, 0.625 * capBase);
  }
  m.rho1Derived = 0.5 * (distQ - 2 * lat.h);  // staircase tolerance

  const double thSigma = p.sigmaHalfWidth;
  auto classify = [&](const Vec3& ctr) {
    if (ball) {
      double r = ctr.norm();
      double polar = std::acos(std::clamp(ctr.z() / std::max(r, 1e-300), -1.0, 1.0));
      if (r < R + 0.5 * T && polar > th0 && polar < thSigma) return Boundary::Sigma;
      return Boundary::OuterRest;
    }
    if (std::abs(ctr.z() - L) < 0.25 * lat.h) return Boundary::Sigma;
    return Boundary::OuterRest;
  };
  finalize_mesh(m, classify);
  return m;
}

// Exact point-segment / point-triangle distance.
double point_segment_dist(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                          const Eigen::Vector2d& b) {
  Eigen::Vector2d ab = b - a;
  double t = std::clamp(ab.dot(p - a) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

double point_triangle_dist(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                           const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  // Ericson, Real-Time Collision Detection, 5.1.5.
  Eigen::Vector3d ab = b - a, ac = c - a, ap = p - a;
  double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return (p - a).norm();
  Eigen::Vector3d bp = p - b;
  double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return (p - b).norm();
  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    double v = d1 / (d1 - d3);
    return (p - (a + v * ab)).norm();
  }
  Eigen::Vector3d cp = p - c;
  double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return (p - c).norm();
  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    double w = d2 / (d2 - d6);
    return (p - (a + w * ac)).norm();
  }
  double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return (p - (b + w * (c - b))).norm();
  }
  double denom = 1.0 / (va + vb + vc);
  double v = vb * denom, w = vc * denom;
  return (p - (a + ab * v + ac * w)).norm();
}

}  // namespace

const char* to_string(Region r) {
  switch (r) {
    case Region::A: return "A";
    case Region::OmegaMinusDtilde: return "OmegaMinusDtilde";
    case Region::DtildeMinusDprime: return "DtildeMinusDprime";
    case Region::DprimeMinusD: return "DprimeMinusD";
    case Region::D: return "D";
  }
  return "?";
}

const char* to_string(Boundary b) {
  switch (b) {
    case Boundary::Sigma: return "Sigma";
    case Boundary::Sigma0: return "Sigma0";
    case Boundary::OuterRest: return "OuterRest";
    case Boundary::dDtilde: return "dDtilde";
    case Boundary::dDprime: return "dDprime";
    case Boundary::dD: return "dD";
  }
  return "?";
}

bool region_from_string(const std::string& s, Region& out) {
  for (auto r : {Region::A, Region::OmegaMinusDtilde, Region::DtildeMinusDprime,
                 Region::DprimeMinusD, Region::D})
    if (s == to_string(r)) {
      out = r;
      return true;
    }
  return false;
}

bool boundary_from_string(const std::string& s, Boundary& out) {
  for (auto b : {Boundary::Sigma, Boundary::Sigma0, Boundary::OuterRest,
                 Boundary::dDtilde, Boundary::dDprime, Boundary::dD})
    if (s == to_string(b)) {
      out = b;
      return true;
    }
  return false;
}

const char* to_string(Family f) {
  switch (f) {
    case Family::Disk: return "disk";
    case Family::AnnulusSector: return "annulus_sector";
    case Family::Ball: return "ball";
    case Family::Box: return "box";
  }
  return "?";
}

bool family_from_string(const std::string& s, Family& out) {
  for (auto f : {Family::Disk, Family::AnnulusSector, Family::Ball, Family::Box})
    if (s == to_string(f)) {
      out = f;
      return true;
    }
  return false;
}

double GeometryParams::diamOmega() const {
  switch (family) {
    case Family::Disk:
    case Family::Ball:
      return 2 * omegaRadius;
    case Family::AnnulusSector:
      return 2 * omegaRadius;
    case Family::Box:
      return boxSize * std::sqrt(3.0);
  }
  return 0;
}

void GeometryParams::validate() const {
  auto require = [](bool ok, const std::string& key, const std::string& msg) {
    if (!ok) fail_geometry(key, msg);
  };
  require(dimension == 2 || dimension == 3, "geometry.dimension",
          "dimension must be 2 or 3");
  bool fam2d = family == Family::Disk || family == Family::AnnulusSector;
  require((dimension == 2) == fam2d, "geometry.family",
          "family does not match dimension (disk/annulus_sector are 2D, "
          "ball/box are 3D)");
  require(rho0 > 0, "geometry.rho0", "rho0 must be positive");
  require(M0 > 0, "geometry.M0", "M0 must be positive");
  require(d0 > 0 && d0 <= rho0, "geometry.d0",
          "the accessible-boundary size must satisfy 0 < d0 <= rho0");
  require(rho2 > 0, "geometry.rho2", "rho2 must be positive");
  require(h1 > 0 && h1 < rho2 / 2, "geometry.h1",
          "erosion depth must satisfy 0 < h1 < rho2/2");
  require(h > 0, "geometry.h", "mesh size must be positive");
  double rho1Bound = rho1 > 0 ? rho1 : h1;  // derived rho1 checked post-build
  require(h < std::min({rho1Bound, rho2, h1}) / 4, "geometry.h",
          "mesh size must satisfy h < min(rho1, rho2, h1)/4 so every "
          "scaffold region holds a layer of elements");
  require(scaffoldR[0] > 0 && scaffoldR[0] < scaffoldR[1] &&
              scaffoldR[1] < scaffoldR[2],
          "geometry.scaffold", "scaffold radii must be strictly increasing");
  require(bulgeThickness > 0, "geometry.bulge", "bulge thickness must be positive");
  require(sigmaHalfWidth > 0 && sigmaHalfWidth <= kPi / 2 + 1e-12,
          "geometry.sigma", "sigma half-width must lie in (0, pi/2]");

  if (family == Family::AnnulusSector)
    require(annulusInnerRadius > 0 && annulusInnerRadius < omegaRadius,
            "geometry.annulusInnerRadius",
            "inner radius must be in (0, omegaRadius)");
  if (family == Family::Box)
    require(bulgeThickness < boxSize / 2, "geometry.bulge",
            "the bulge base must fit strictly inside the top face");

  // Nearest-wall clearance of the scaffold, per family.
  double wall = 0;
  switch (family) {
    case Family::Disk:
    case Family::Ball:
      wall = omegaRadius - scaffoldR[2];
      break;
    case Family::AnnulusSector:
      wall = 0.5 * (omegaRadius - annulusInnerRadius) - scaffoldR[2];
      break;
    case Family::Box:
      wall = boxSize / 2 - scaffoldR[2];
      break;
  }
  require(wall > 2 * rho2 - 2 * h, "geometry.rho2",
          "Dtilde is too close to the boundary: need "
          "dist(dDtilde, boundary of the rho2-erosion) > rho2 "
          "(up to mesh tolerance)");
  require(scaffoldR[1] - scaffoldR[0] > rho2 - 1.5 * h &&
              scaffoldR[2] - scaffoldR[1] > rho2 - 1.5 * h,
          "geometry.scaffold",
          "scaffold shells must be separated by more than rho2 "
          "(up to mesh tolerance)");
  double distD = wall + scaffoldR[2] - scaffoldR[0];
  require(distD >= rho0, "geometry.rho0",
          "D violates dist(D, boundary of Omega) >= rho0");
}

std::vector<int> MeshedDomain::cellsOf(const std::vector<Region>& regions) const {
  std::vector<int> out;
  for (int c = 0; c < numCells(); ++c)
    for (Region r : regions)
      if (cellRegion[c] == r) {
        out.push_back(c);
        break;
      }
  return out;
}

std::vector<int> MeshedDomain::facetsOf(Boundary tag) const {
  std::vector<int> out;
  for (int f = 0; f < static_cast<int>(facets.size()); ++f)
    if (facets[f].tag == tag) out.push_back(f);
  return out;
}

std::vector<int> MeshedDomain::facetsOfSigmaAll() const {
  std::vector<int> out;
  for (int f = 0; f < static_cast<int>(facets.size()); ++f)
    if (facets[f].tag == Boundary::Sigma || facets[f].tag == Boundary::Sigma0)
      out.push_back(f);
  return out;
}

std::vector<int> MeshedDomain::outerBoundaryFacets() const {
  std::vector<int> out;
  for (int f = 0; f < static_cast<int>(facets.size()); ++f)
    if (facets[f].cellOuter < 0) out.push_back(f);
  return out;
}

std::vector<int> MeshedDomain::facetVertices(const std::vector<int>& facetIds) const {
  std::vector<char> seen(numVertices(), 0);
  std::vector<int> out;
  for (int f : facetIds)
    for (int k = 0; k < verticesPerFacet(); ++k) {
      int v = facets[f].v[k];
      if (!seen[v]) {
        seen[v] = 1;
        out.push_back(v);
      }
    }
  std::sort(out.begin(), out.end());
  return out;
}

double MeshedDomain::facetMeasure(int f) const {
  const auto& fa = facets[f];
  if (dim == 2) {
    Eigen::Vector2d a = vertices.row(fa.v[0]).head<2>();
    Eigen::Vector2d b = vertices.row(fa.v[1]).head<2>();
    return (b - a).norm();
  }
  Eigen::Vector3d a = vertices.row(fa.v[0]);
  Eigen::Vector3d b = vertices.row(fa.v[1]);
  Eigen::Vector3d c = vertices.row(fa.v[2]);
  return 0.5 * (b - a).cross(c - a).norm();
}

Vec3 MeshedDomain::facetCentroid(int f) const {
  Vec3 ctr = Vec3::Zero();
  for (int k = 0; k < verticesPerFacet(); ++k)
    ctr.head(dim) += vertices.row(facets[f].v[k]);
  return ctr / verticesPerFacet();
}

Vec3 MeshedDomain::facetNormal(int f) const {
  const auto& fa = facets[f];
  Vec3 n = Vec3::Zero();
  if (dim == 2) {
    Eigen::Vector2d a = vertices.row(fa.v[0]).head<2>();
    Eigen::Vector2d b = vertices.row(fa.v[1]).head<2>();
    Eigen::Vector2d t = (b - a).normalized();
    n.head<2>() = Eigen::Vector2d(t.y(), -t.x());
  } else {
    Eigen::Vector3d a = vertices.row(fa.v[0]);
    Eigen::Vector3d b = vertices.row(fa.v[1]);
    Eigen::Vector3d c = vertices.row(fa.v[2]);
    n = (b - a).cross(c - a).normalized();
  }
  Vec3 inner = Vec3::Zero();
  inner.head(dim) = cellBarycenter.row(fa.cellInner);
  Vec3 ctr = facetCentroid(f);
  if (n.dot(ctr - inner) < 0) n = -n;
  return n;
}

double MeshedDomain::distanceToFacet(const Eigen::VectorXd& p, int f) const {
  const auto& fa = facets[f];
  if (dim == 2)
    return point_segment_dist(p.head<2>(), vertices.row(fa.v[0]).head<2>(),
                              vertices.row(fa.v[1]).head<2>());
  return point_triangle_dist(p.head<3>(), vertices.row(fa.v[0]),
                             vertices.row(fa.v[1]), vertices.row(fa.v[2]));
}

double MeshedDomain::distanceToFacets(const Eigen::VectorXd& p,
                                      const std::vector<int>& facetIds) const {
  double d = std::numeric_limits<double>::infinity();
  for (int f : facetIds) d = std::min(d, distanceToFacet(p, f));
  return d;
}

void MeshedDomain::check() const {
  auto require = [](bool ok, const std::string& key, const std::string& msg) {
    if (!ok) fail_geometry(key, msg);
  };
  for (int c = 0; c < numCells(); ++c)
    require(cellVolume[c] > 1e-300, "geometry.h",
            "degenerate (zero measure) element " + std::to_string(c));

  std::array<int, 5> regionCount{};
  for (Region r : cellRegion) regionCount[static_cast<int>(r)]++;
  for (int k = 0; k < 5; ++k)
    require(regionCount[k] > 0, "geometry",
            std::string("region ") + to_string(static_cast<Region>(k)) +
                " has no cells; the scaffold does not fit");

  bool hasSigma0 = false, hasSigma = false;
  for (const auto& fa : facets) {
    if (fa.tag == Boundary::Sigma0) {
      hasSigma0 = true;
      require(fa.cellOuter >= 0, "geometry", "Sigma0 facet not interior");
    }
    if (fa.tag == Boundary::Sigma) hasSigma = true;
    if (fa.tag == Boundary::dDtilde || fa.tag == Boundary::dDprime ||
        fa.tag == Boundary::dD)
      require(fa.cellOuter >= 0, "geometry",
              std::string(to_string(fa.tag)) + " facet must be shared by two cells");
  }
  require(hasSigma0, "geometry.sigma", "Sigma0 is empty");
  require(hasSigma, "geometry.sigma",
          "Sigma \\ Sigma0 is empty; Sigma0 must be strictly inside Sigma");

  // Sigma0 strictly inside Sigma: no Sigma0 vertex touches an untagged
  // part of the boundary of Omega (facets of the bulge itself excluded).
  std::vector<char> sigma0Vert(numVertices(), 0);
  for (const auto& fa : facets)
    if (fa.tag == Boundary::Sigma0)
      for (int k = 0; k < verticesPerFacet(); ++k) sigma0Vert[fa.v[k]] = 1;
  if (dim == 2) {
    for (const auto& fa : facets)
      if (fa.tag == Boundary::OuterRest &&
          cellRegion[fa.cellInner] != Region::A)
        for (int k = 0; k < verticesPerFacet(); ++k)
          require(!sigma0Vert[fa.v[k]], "geometry.sigma",
                  "Sigma0 touches the inaccessible boundary");
  }

  require(cells_connected(*this, cellsOf({Region::A, Region::OmegaMinusDtilde,
                                          Region::DtildeMinusDprime,
                                          Region::DprimeMinusD, Region::D})),
          "geometry", "the augmented domain is not connected");

  double r1 = rho1();
  require(r1 > 0, "geometry.rho1", "derived rho1 is not positive");
  require(params.h < std::min({r1, params.rho2, params.h1}) / 4, "geometry.h",
          "mesh size must satisfy h < min(rho1, rho2, h1)/4");
}

MeshedDomain build_domain(const GeometryParams& params) {
  params.validate();
  MeshedDomain m = (params.dimension == 2) ? build_polar_2d(params)
                                           : build_lattice_3d(params);
  m.check();
  return m;
}

std::vector<int> erode(const MeshedDomain& mesh, const std::vector<int>& region,
                       double h) {
  if (h <= 0) fail_geometry("erode.h", "erosion depth must be positive");
  // Boundary faces of the cell set.
  std::vector<char> inSet(mesh.numCells(), 0);
  for (int c : region) inSet[c] = 1;
  std::unordered_map<EdgeKey, std::pair<int, int>, EdgeKeyHash> faces;
  for (int c : region)
    for (auto& f : cell_faces(mesh.cells[c], mesh.dim)) {
      auto key = face_key(f);
      auto it = faces.find(key);
      if (it == faces.end())
        faces.emplace(key, std::make_pair(c, -1));
      else
        it->second.second = c;
    }
  struct BFace {
    Vec3 centroid;
    std::array<int, 3> v;
    double halfDiam;
  };
  std::vector<BFace> bfaces;
  for (auto& [key, cc] : faces)
    if (cc.second < 0) {
      BFace bf;
      bf.v = key.v;
      bf.centroid = Vec3::Zero();
      for (int k = 0; k < mesh.dim; ++k)
        bf.centroid.head(mesh.dim) += mesh.vertices.row(key.v[k]);
      bf.centroid /= mesh.dim;
      double hd = 0;
      for (int k = 0; k < mesh.dim; ++k) {
        Vec3 vv = Vec3::Zero();
        vv.head(mesh.dim) = mesh.vertices.row(key.v[k]);
        hd = std::max(hd, (vv - bf.centroid).norm());
      }
      bf.halfDiam = hd;
      bfaces.push_back(bf);
    }

  // Bucket the boundary faces for near-threshold queries.
  double bucket = std::max(h, 4 * mesh.params.h);
  std::unordered_map<long long, std::vector<int>> grid;
  auto cellKey = [&](const Vec3& p) {
    long long ix = static_cast<long long>(std::floor(p.x() / bucket));
    long long iy = static_cast<long long>(std::floor(p.y() / bucket));
    long long iz = static_cast<long long>(std::floor(p.z() / bucket));
    return (ix * 73856093) ^ (iy * 19349663) ^ (iz * 83492791);
  };
  for (int i = 0; i < static_cast<int>(bfaces.size()); ++i)
    grid[cellKey(bfaces[i].centroid)].push_back(i);

  auto exactDist = [&](const Vec3& p, const BFace& bf) {
    if (mesh.dim == 2) {
      return point_segment_dist(p.head<2>(),
                                mesh.vertices.row(bf.v[0]).head<2>(),
                                mesh.vertices.row(bf.v[1]).head<2>());
    }
    return point_triangle_dist(p.head<3>(), mesh.vertices.row(bf.v[0]),
                               mesh.vertices.row(bf.v[1]),
                               mesh.vertices.row(bf.v[2]));
  };

  std::vector<int> out;
  for (int c : region) {
    Vec3 bary = Vec3::Zero();
    bary.head(mesh.dim) = mesh.cellBarycenter.row(c);
    // Scan grid neighborhood; if no face is near, the barycenter is deep
    // inside and survives erosion (assuming h < bucket radius coverage).
    double minD = std::numeric_limits<double>::infinity();
    for (int dx = -1; dx <= 1 && minD > h; ++dx)
      for (int dy = -1; dy <= 1 && minD > h; ++dy)
        for (int dz = (mesh.dim == 3 ? -1 : 0);
             dz <= (mesh.dim == 3 ? 1 : 0) && minD > h; ++dz) {
          Vec3 q = bary + bucket * Vec3(dx, dy, dz);
          auto it = grid.find(cellKey(q));
          if (it == grid.end()) continue;
          for (int i : it->second) {
            const BFace& bf = bfaces[i];
            if ((bary - bf.centroid).norm() - bf.halfDiam > h) continue;
            minD = std::min(minD, exactDist(bary, bf));
            if (minD <= h) break;
          }
        }
    if (minD > h) out.push_back(c);
  }
  if (out.empty())
    fail_geometry("erode.h", "erosion produced an empty region");
  return out;
}

std::vector<int> shell_outside_Dprime(const MeshedDomain& mesh) {
  return mesh.cellsOf({Region::A, Region::OmegaMinusDtilde,
                       Region::DtildeMinusDprime});
}

std::vector<int> shell_outside_D(const MeshedDomain& mesh) {
  return mesh.cellsOf({Region::A, Region::OmegaMinusDtilde,
                       Region::DtildeMinusDprime, Region::DprimeMinusD});
}

bool cells_connected(const MeshedDomain& mesh, const std::vector<int>& cellSet) {
  if (cellSet.empty()) return false;
  std::unordered_map<EdgeKey, std::pair<int, int>, EdgeKeyHash> faces;
  std::unordered_map<int, std::vector<int>> adj;
  for (int c : cellSet)
    for (auto& f : cell_faces(mesh.cells[c], mesh.dim)) {
      auto key = face_key(f);
      auto it = faces.find(key);
      if (it == faces.end())
        faces.emplace(key, std::make_pair(c, -1));
      else {
        adj[it->second.first].push_back(c);
        adj[c].push_back(it->second.first);
      }
    }
  std::unordered_map<int, char> visited;
  std::queue<int> q;
  q.push(cellSet[0]);
  visited[cellSet[0]] = 1;
  size_t count = 0;
  while (!q.empty()) {
    int c = q.front();
    q.pop();
    ++count;
    for (int n : adj[c])
      if (!visited[n]) {
        visited[n] = 1;
        q.push(n);
      }
  }
  return count == cellSet.size();
}

SurfaceQuadrature sample_surface(const MeshedDomain& mesh,
                                 const std::vector<int>& facetIds,
                                 double spacing) {
  if (facetIds.empty())
    fail_geometry("sample_surface", "the requested facet set is empty");
  if (spacing <= 0) fail_geometry("sample_surface", "spacing must be positive");

  std::vector<Eigen::VectorXd> pts;
  std::vector<Vec3> nrms;
  std::vector<double> wts;
  std::vector<int> owner;
  for (int f : facetIds) {
    double meas = mesh.facetMeasure(f);
    Vec3 n = mesh.facetNormal(f);
    const auto& fa = mesh.facets[f];
    if (mesh.dim == 2) {
      Eigen::Vector2d a = mesh.vertices.row(fa.v[0]).head<2>();
      Eigen::Vector2d b = mesh.vertices.row(fa.v[1]).head<2>();
      int npts = std::clamp(static_cast<int>(std::ceil(meas / spacing)), 1, 4);
      if (npts == 1) {
        pts.push_back(0.5 * (a + b));
        wts.push_back(meas);
        nrms.push_back(n);
        owner.push_back(f);
      } else if (npts == 2) {
        // Two-point Gauss-Legendre on the segment.
        double g = 0.5 / std::sqrt(3.0);
        for (double s : {0.5 - g, 0.5 + g}) {
          pts.push_back(a + s * (b - a));
          wts.push_back(0.5 * meas);
          nrms.push_back(n);
          owner.push_back(f);
        }
      } else {
        // Gauss-Legendre 3 or 4 points.
        static const double x3[] = {-0.7745966692414834, 0.0, 0.7745966692414834};
        static const double w3[] = {5.0 / 9, 8.0 / 9, 5.0 / 9};
        static const double x4[] = {-0.8611363115940526, -0.3399810435848563,
                                    0.3399810435848563, 0.8611363115940526};
        static const double w4[] = {0.3478548451374538, 0.6521451548625461,
                                    0.6521451548625461, 0.3478548451374538};
        const double* xs = npts == 3 ? x3 : x4;
        const double* ws = npts == 3 ? w3 : w4;
        for (int k = 0; k < npts; ++k) {
          double s = 0.5 * (1 + xs[k]);
          pts.push_back(a + s * (b - a));
          wts.push_back(0.5 * ws[k] * meas);
          nrms.push_back(n);
          owner.push_back(f);
        }
      }
    } else {
      Eigen::Vector3d a = mesh.vertices.row(fa.v[0]);
      Eigen::Vector3d b = mesh.vertices.row(fa.v[1]);
      Eigen::Vector3d c = mesh.vertices.row(fa.v[2]);
      double size = std::sqrt(meas);
      int npts = (size <= spacing) ? 1 : 3;
      if (npts == 1) {
        pts.push_back(((a + b + c) / 3).eval());
        wts.push_back(meas);
        nrms.push_back(n);
        owner.push_back(f);
      } else {
        // Midpoint rule on edges, degree-2 exact.
        for (auto& q : {0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)}) {
          pts.push_back(q);
          wts.push_back(meas / 3);
          nrms.push_back(n);
          owner.push_back(f);
        }
      }
    }
  }

  SurfaceQuadrature sq;
  int n = static_cast<int>(pts.size());
  sq.points.resize(n, mesh.dim);
  sq.normals.resize(n, mesh.dim);
  sq.weights.resize(n);
  sq.facet = owner;
  for (int i = 0; i < n; ++i) {
    sq.points.row(i) = pts[i].head(mesh.dim);
    sq.normals.row(i) = nrms[i].head(mesh.dim);
    sq.weights[i] = wts[i];
  }
  return sq;
}

SurfaceQuadrature sample_surface(const MeshedDomain& mesh, Boundary tag,
                                 double spacing) {
  return sample_surface(mesh, mesh.facetsOf(tag), spacing);
}

int nearest_vertex(const MeshedDomain& mesh, const Eigen::VectorXd& p) {
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (int v = 0; v < mesh.numVertices(); ++v) {
    double d = (mesh.vertices.row(v).transpose().head(mesh.dim) - p.head(mesh.dim))
                   .squaredNorm();
    if (d < bd) {
      bd = d;
      best = v;
    }
  }
  return best;
}

std::vector<int> vertices_in_source_ball(const MeshedDomain& mesh) {
  double r1 = mesh.rho1();
  std::vector<char> onOuter(mesh.numVertices(), 0);
  for (const auto& fa : mesh.facets)
    if (fa.cellOuter < 0)
      for (int k = 0; k < mesh.verticesPerFacet(); ++k) onOuter[fa.v[k]] = 1;
  std::vector<int> out;
  for (int v = 0; v < mesh.numVertices(); ++v) {
    if (onOuter[v]) continue;
    Vec3 x = Vec3::Zero();
    x.head(mesh.dim) = mesh.vertices.row(v);
    if ((x - mesh.markedPoint).norm() < r1) out.push_back(v);
  }
  return out;
}

}  // namespace calderon

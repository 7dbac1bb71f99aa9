#pragma once

#include <optional>

#include "calderon/types.hpp"

namespace calderon {

/// Shape family of the computational domain.
enum class Family { Disk, AnnulusSector, Ball, Box };

bool family_from_string(const std::string& s, Family& out);
const char* to_string(Family f);

/// Parameters of the nested geometric scaffold.
///
/// The domain Omega carries an accessible boundary portion Sigma; the
/// attachment A is glued over Sigma0 (the middle half of Sigma) to form
/// the augmented domain.  D, D', Dtilde are nested interior subdomains.
/// rho1 <= 0 requests the derived value (dist(Q, boundary of A) - h)/2.
struct GeometryParams {
  int dimension = 2;
  Family family = Family::Disk;

  double rho0 = 0.3;   // distance of D from the original boundary
  double M0 = 1.0;     // Lipschitz constant of the family (documented)
  double d0 = 0.3;     // size of Sigma, 0 < d0 <= rho0
  double rho1 = 0.0;   // ball radius at the marked point Q; <=0 -> derived
  double rho2 = 0.16;  // mutual distance of the scaffold boundaries
  double h1 = 0.075;   // erosion depth, < rho2/2
  double h = 0.015;    // mesh size (max cell extent along any axis)

  // Family-specific sizes.  Disk / annulus sector / ball: omegaRadius is
  // the outer radius of Omega and scaffoldR the radii of D, D', Dtilde.
  // Box: Omega = (0, boxSize)^3, scaffoldR are half-widths of nested
  // cubes centered at boxCenter.
  double omegaRadius = 1.0;
  double boxSize = 1.0;
  std::array<double, 3> scaffoldR = {0.25, 0.45, 0.65};

  // Angular layout of Sigma.  2D: Sigma = (sigmaCenter - sigmaHalfWidth,
  // sigmaCenter + sigmaHalfWidth) in polar angle; Sigma0 is the middle
  // half of Sigma (a convention; the construction only requires
  // Sigma0 strictly inside Sigma).  3D ball: Sigma is the polar cap of
  // half-angle sigmaHalfWidth and Sigma0 the cap of half that angle.
  double sigmaCenter = 1.5707963267948966;  // pi/2
  double sigmaHalfWidth = 1.5707963267948966;

  double bulgeThickness = 0.35;  // radial extent of the attachment
  double annulusInnerRadius = 0.4;  // annulus-sector family only

  double diamOmega() const;

  /// Throws ValidationError naming the violated constraint.
  void validate() const;
};

struct SurfaceQuadrature {
  MatX points;    // n x dim
  MatX normals;   // n x dim, outward w.r.t. the enclosed side
  VecX weights;   // sums to the surface measure of the facet set
  std::vector<int> facet;  // owning facet index per point
};

/// Conforming simplicial mesh of the augmented domain with region and
/// boundary tags.  Immutable after construction.
struct MeshedDomain {
  int dim = 2;
  GeometryParams params;

  MatX vertices;                        // nv x dim
  std::vector<std::array<int, 4>> cells;  // [3] == -1 in 2D
  std::vector<Region> cellRegion;

  struct Facet {
    std::array<int, 3> v{-1, -1, -1};  // [2] == -1 in 2D
    Boundary tag;
    int cellInner = -1;  // cell on the enclosed side (or the only cell)
    int cellOuter = -1;  // -1 when the facet lies on the outer boundary
  };
  std::vector<Facet> facets;

  Vec3 markedPoint = Vec3::Zero();  // Q
  double rho1Derived = 0.0;         // the value used when params.rho1 <= 0

  // Derived data filled by build_domain.
  VecX cellVolume;
  MatX cellBarycenter;  // nc x dim

  int numVertices() const { return static_cast<int>(vertices.rows()); }
  int numCells() const { return static_cast<int>(cells.size()); }
  int verticesPerCell() const { return dim + 1; }
  int verticesPerFacet() const { return dim; }

  double rho1() const { return params.rho1 > 0 ? params.rho1 : rho1Derived; }

  Eigen::VectorXd vertex(int i) const { return vertices.row(i); }

  /// Cells whose region tag is in `regions`.
  std::vector<int> cellsOf(const std::vector<Region>& regions) const;
  /// Facets carrying the tag.
  std::vector<int> facetsOf(Boundary tag) const;
  /// All facets of the original boundary of Omega (Sigma plus Sigma0
  /// plus the inaccessible part, which is stored under OuterRest with
  /// onOmegaBoundary set); used by the local DtN assembly.
  std::vector<int> facetsOfSigmaAll() const;
  /// Facets of the outer boundary of the augmented domain.
  std::vector<int> outerBoundaryFacets() const;

  /// Vertices incident to any facet in `facetIds`.
  std::vector<int> facetVertices(const std::vector<int>& facetIds) const;

  double facetMeasure(int f) const;
  Vec3 facetCentroid(int f) const;
  /// Unit normal oriented away from cellInner.
  Vec3 facetNormal(int f) const;

  /// Euclidean distance from a point to the facet (exact, not centroid).
  double distanceToFacet(const Eigen::VectorXd& p, int f) const;
  double distanceToFacets(const Eigen::VectorXd& p,
                          const std::vector<int>& facetIds) const;

  /// Structural checks (tag partition, two-cell interior facets,
  /// nesting, distances); throws ValidationError on failure.
  void check() const;
};

/// Builds the tagged mesh.  Rejects infeasible parameter combinations
/// with a diagnostic naming the violated distance constraint.
MeshedDomain build_domain(const GeometryParams& params);

/// Erosion E_h: cells of `region` whose barycenter is at distance > h
/// from the boundary of the cell set.  Throws when the result is empty.
std::vector<int> erode(const MeshedDomain& mesh, const std::vector<int>& region,
                       double h);

/// Cells of the closure complement of D' in the augmented domain
/// (the shell where the kernel is smooth).
std::vector<int> shell_outside_Dprime(const MeshedDomain& mesh);
/// Cells outside closure(D).
std::vector<int> shell_outside_D(const MeshedDomain& mesh);

/// True when the cell set is connected through shared facets.
bool cells_connected(const MeshedDomain& mesh, const std::vector<int>& cellSet);

/// Quadrature points with outward normals on a tagged facet set.
/// `spacing` controls points per facet: one point (centroid rule) when
/// spacing >= facet size, a higher-order rule otherwise.
SurfaceQuadrature sample_surface(const MeshedDomain& mesh, Boundary tag,
                                 double spacing);
SurfaceQuadrature sample_surface(const MeshedDomain& mesh,
                                 const std::vector<int>& facetIds,
                                 double spacing);

/// Nearest mesh vertex to a point.
int nearest_vertex(const MeshedDomain& mesh, const Eigen::VectorXd& p);

/// Vertices inside the ball B_rho1(Q), excluding outer-boundary vertices.
std::vector<int> vertices_in_source_ball(const MeshedDomain& mesh);

}  // namespace calderon

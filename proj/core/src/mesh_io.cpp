#include "calderon/mesh_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace calderon {

namespace {

[[noreturn]] void fail_io(const std::string& msg) {
  throw ValidationError(ErrorKind::Io, "io", msg);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) fail_io("cannot open for writing: " + path);
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail_io("cannot open for reading: " + path);
  return is;
}

std::string expect_word(std::istream& is, const char* what) {
  std::string w;
  if (!(is >> w)) fail_io(std::string("truncated file, expected ") + what);
  return w;
}

void expect_keyword(std::istream& is, const std::string& kw) {
  std::string w = expect_word(is, kw.c_str());
  if (w != kw) fail_io("expected '" + kw + "', found '" + w + "'");
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void dump_mesh(const MeshedDomain& m, std::ostream& os) {
  const auto& p = m.params;
  os << "calderon-mesh 1\n";
  os << "dim " << m.dim << "\n";
  os << "param family " << to_string(p.family) << "\n";
  auto num = [&](const char* k, double v) {
    os << "param " << k << " " << format_double(v) << "\n";
  };
  num("rho0", p.rho0);
  num("M0", p.M0);
  num("d0", p.d0);
  num("rho1", p.rho1);
  num("rho2", p.rho2);
  num("h1", p.h1);
  num("h", p.h);
  num("omegaRadius", p.omegaRadius);
  num("boxSize", p.boxSize);
  num("scaffoldR0", p.scaffoldR[0]);
  num("scaffoldR1", p.scaffoldR[1]);
  num("scaffoldR2", p.scaffoldR[2]);
  num("sigmaCenter", p.sigmaCenter);
  num("sigmaHalfWidth", p.sigmaHalfWidth);
  num("bulgeThickness", p.bulgeThickness);
  num("annulusInnerRadius", p.annulusInnerRadius);
  os << "marked_point " << format_double(m.markedPoint.x()) << " "
     << format_double(m.markedPoint.y()) << " "
     << format_double(m.markedPoint.z()) << "\n";
  os << "rho1_derived " << format_double(m.rho1Derived) << "\n";

  os << "vertices " << m.numVertices() << "\n";
  for (int v = 0; v < m.numVertices(); ++v) {
    os << format_double(m.vertices(v, 0)) << " " << format_double(m.vertices(v, 1));
    if (m.dim == 3) os << " " << format_double(m.vertices(v, 2));
    os << "\n";
  }
  os << "cells " << m.numCells() << "\n";
  for (int c = 0; c < m.numCells(); ++c) {
    for (int k = 0; k <= m.dim; ++k) os << m.cells[c][k] << " ";
    os << to_string(m.cellRegion[c]) << "\n";
  }
  os << "facets " << m.facets.size() << "\n";
  for (const auto& fa : m.facets) {
    for (int k = 0; k < m.dim; ++k) os << fa.v[k] << " ";
    os << to_string(fa.tag) << " " << fa.cellInner << " " << fa.cellOuter << "\n";
  }
}

void dump_mesh(const MeshedDomain& mesh, const std::string& path) {
  auto os = open_out(path);
  dump_mesh(mesh, os);
}

MeshedDomain load_mesh(std::istream& is) {
  expect_keyword(is, "calderon-mesh");
  expect_keyword(is, "1");
  MeshedDomain m;
  expect_keyword(is, "dim");
  is >> m.dim;
  if (m.dim != 2 && m.dim != 3) fail_io("bad mesh dimension");
  m.params.dimension = m.dim;

  std::string word;
  while (is >> word && word == "param") {
    std::string k = expect_word(is, "param name");
    std::string v = expect_word(is, "param value");
    auto& p = m.params;
    if (k == "family") {
      if (!family_from_string(v, p.family)) fail_io("unknown family " + v);
      continue;
    }
    double x = std::strtod(v.c_str(), nullptr);
    if (k == "rho0") p.rho0 = x;
    else if (k == "M0") p.M0 = x;
    else if (k == "d0") p.d0 = x;
    else if (k == "rho1") p.rho1 = x;
    else if (k == "rho2") p.rho2 = x;
    else if (k == "h1") p.h1 = x;
    else if (k == "h") p.h = x;
    else if (k == "omegaRadius") p.omegaRadius = x;
    else if (k == "boxSize") p.boxSize = x;
    else if (k == "scaffoldR0") p.scaffoldR[0] = x;
    else if (k == "scaffoldR1") p.scaffoldR[1] = x;
    else if (k == "scaffoldR2") p.scaffoldR[2] = x;
    else if (k == "sigmaCenter") p.sigmaCenter = x;
    else if (k == "sigmaHalfWidth") p.sigmaHalfWidth = x;
    else if (k == "bulgeThickness") p.bulgeThickness = x;
    else if (k == "annulusInnerRadius") p.annulusInnerRadius = x;
    else fail_io("unknown mesh param " + k);
  }
  if (word != "marked_point") fail_io("expected marked_point");
  is >> m.markedPoint.x() >> m.markedPoint.y() >> m.markedPoint.z();
  expect_keyword(is, "rho1_derived");
  is >> m.rho1Derived;

  expect_keyword(is, "vertices");
  int nv;
  is >> nv;
  m.vertices.resize(nv, m.dim);
  for (int v = 0; v < nv; ++v)
    for (int k = 0; k < m.dim; ++k) is >> m.vertices(v, k);

  expect_keyword(is, "cells");
  int nc;
  is >> nc;
  m.cells.resize(nc);
  m.cellRegion.resize(nc);
  m.cellVolume.resize(nc);
  m.cellBarycenter.resize(nc, m.dim);
  for (int c = 0; c < nc; ++c) {
    m.cells[c] = {-1, -1, -1, -1};
    for (int k = 0; k <= m.dim; ++k) is >> m.cells[c][k];
    std::string tag = expect_word(is, "region tag");
    if (!region_from_string(tag, m.cellRegion[c]))
      fail_io("unknown region tag " + tag);
  }

  expect_keyword(is, "facets");
  int nf;
  is >> nf;
  m.facets.resize(nf);
  for (int f = 0; f < nf; ++f) {
    auto& fa = m.facets[f];
    fa.v = {-1, -1, -1};
    for (int k = 0; k < m.dim; ++k) is >> fa.v[k];
    std::string tag = expect_word(is, "boundary tag");
    if (!boundary_from_string(tag, fa.tag)) fail_io("unknown boundary tag " + tag);
    is >> fa.cellInner >> fa.cellOuter;
  }
  if (!is) fail_io("truncated mesh file");

  // Rebuild derived cell data.
  for (int c = 0; c < nc; ++c) {
    Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(m.dim);
    for (int k = 0; k <= m.dim; ++k) b += m.vertices.row(m.cells[c][k]);
    m.cellBarycenter.row(c) = b / (m.dim + 1);
    if (m.dim == 2) {
      Eigen::Vector2d a = m.vertices.row(m.cells[c][0]).head<2>();
      Eigen::Vector2d bb = m.vertices.row(m.cells[c][1]).head<2>();
      Eigen::Vector2d d = m.vertices.row(m.cells[c][2]).head<2>();
      m.cellVolume[c] =
          0.5 * std::abs((bb - a).x() * (d - a).y() - (bb - a).y() * (d - a).x());
    } else {
      Eigen::Vector3d a = m.vertices.row(m.cells[c][0]);
      Eigen::Vector3d bb = m.vertices.row(m.cells[c][1]);
      Eigen::Vector3d d = m.vertices.row(m.cells[c][2]);
      Eigen::Vector3d e = m.vertices.row(m.cells[c][3]);
      m.cellVolume[c] = std::abs((bb - a).cross(d - a).dot(e - a)) / 6.0;
    }
  }
  return m;
}

MeshedDomain load_mesh(const std::string& path) {
  auto is = open_in(path);
  return load_mesh(is);
}

void dump_field_values(const VecX& values, double lambda, double E, double E1,
                       std::ostream& os) {
  os << "calderon-field 1\n";
  os << "lambda " << format_double(lambda) << "\n";
  os << "E " << format_double(E) << "\n";
  os << "E1 " << format_double(E1) << "\n";
  os << "values " << values.size() << "\n";
  for (Eigen::Index i = 0; i < values.size(); ++i)
    os << format_double(values[i]) << "\n";
}

void dump_field_values(const VecX& values, double lambda, double E, double E1,
                       const std::string& path) {
  auto os = open_out(path);
  dump_field_values(values, lambda, E, E1, os);
}

FieldFile load_field_values(std::istream& is) {
  expect_keyword(is, "calderon-field");
  expect_keyword(is, "1");
  FieldFile f;
  expect_keyword(is, "lambda");
  is >> f.lambda;
  expect_keyword(is, "E");
  is >> f.E;
  expect_keyword(is, "E1");
  is >> f.E1;
  expect_keyword(is, "values");
  Eigen::Index n;
  is >> n;
  f.values.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) is >> f.values[i];
  if (!is) fail_io("truncated field file");
  return f;
}

FieldFile load_field_values(const std::string& path) {
  auto is = open_in(path);
  return load_field_values(is);
}

void dump_matrix(const MatX& m, const std::string& name, std::ostream& os) {
  os << "matrix " << name << " " << m.rows() << " " << m.cols() << "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << " ";
      os << format_double(m(i, j));
    }
    os << "\n";
  }
}

MatX load_matrix(std::istream& is, std::string* name) {
  expect_keyword(is, "matrix");
  std::string nm = expect_word(is, "matrix name");
  if (name) *name = nm;
  Eigen::Index r, c;
  is >> r >> c;
  MatX m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) is >> m(i, j);
  if (!is) fail_io("truncated matrix block");
  return m;
}

}  // namespace calderon

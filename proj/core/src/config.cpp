#include "calderon/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace calderon {

namespace {

using nlohmann::json;

[[noreturn]] void fail_parse(const std::string& key, const std::string& msg) {
  throw ValidationError(ErrorKind::ConfigParse, key, msg);
}

/// Tracks which keys of an object were consumed; unknown keys are errors.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail_parse(path_, "expected a JSON object");
  }
  ~Section() = default;

  void finish() {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key()))
        fail_parse(path_ + "." + it.key(), "unknown configuration key");
  }

  bool has(const std::string& k) {
    used_.insert(k);
    return j_.contains(k);
  }
  const json& at(const std::string& k) {
    used_.insert(k);
    return j_.at(k);
  }
  double num(const std::string& k, double dflt) {
    if (!has(k)) return dflt;
    const json& v = at(k);
    if (!v.is_number()) fail_parse(path_ + "." + k, "expected a number");
    return v.get<double>();
  }
  int integer(const std::string& k, int dflt) {
    if (!has(k)) return dflt;
    const json& v = at(k);
    if (!v.is_number_integer()) fail_parse(path_ + "." + k, "expected an integer");
    return v.get<int>();
  }
  bool boolean(const std::string& k, bool dflt) {
    if (!has(k)) return dflt;
    const json& v = at(k);
    if (!v.is_boolean()) fail_parse(path_ + "." + k, "expected a boolean");
    return v.get<bool>();
  }
  std::string str(const std::string& k, const std::string& dflt) {
    if (!has(k)) return dflt;
    const json& v = at(k);
    if (!v.is_string()) fail_parse(path_ + "." + k, "expected a string");
    return v.get<std::string>();
  }
  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

}  // namespace

RunConfig parse_config_text(const std::string& jsonText) {
  json root;
  try {
    root = json::parse(jsonText);
  } catch (const std::exception& e) {
    fail_parse("config", std::string("JSON parse error: ") + e.what());
  }
  RunConfig cfg;
  Section top(root, "config");

  if (top.has("geometry")) {
    Section g(top.at("geometry"), "geometry");
    auto& p = cfg.geometry;
    p.dimension = g.integer("dimension", p.dimension);
    std::string fam = g.str("family", to_string(p.family));
    if (!family_from_string(fam, p.family))
      fail_parse("geometry.family", "unknown family '" + fam + "'");
    p.rho0 = g.num("rho0", p.rho0);
    p.M0 = g.num("M0", p.M0);
    p.d0 = g.num("d0", p.d0);
    p.rho1 = g.num("rho1", p.rho1);
    p.rho2 = g.num("rho2", p.rho2);
    p.h1 = g.num("h1", p.h1);
    p.h = g.num("h", p.h);
    p.omegaRadius = g.num("omegaRadius", p.omegaRadius);
    p.boxSize = g.num("boxSize", p.boxSize);
    p.sigmaCenter = g.num("sigmaCenter", p.sigmaCenter);
    p.sigmaHalfWidth = g.num("sigmaHalfWidth", p.sigmaHalfWidth);
    p.bulgeThickness = g.num("bulgeThickness", p.bulgeThickness);
    p.annulusInnerRadius = g.num("annulusInnerRadius", p.annulusInnerRadius);
    if (g.has("scaffold")) {
      const json& s = g.at("scaffold");
      if (!s.is_array() || s.size() != 3)
        fail_parse("geometry.scaffold", "expected an array of three radii");
      for (int i = 0; i < 3; ++i) p.scaffoldR[i] = s[i].get<double>();
    }
    g.finish();
  }

  if (top.has("conductivity")) {
    Section c(top.at("conductivity"), "conductivity");
    cfg.conductivity.lambda = c.num("lambda", cfg.conductivity.lambda);
    cfg.conductivity.E = c.num("E", cfg.conductivity.E);
    if (c.has("profile")) {
      Section pr(c.at("profile"), "conductivity.profile");
      std::string type = pr.str("type", "constant");
      if (!profile_from_string(type, cfg.conductivity.profile.profile))
        fail_parse("conductivity.profile.type", "unknown profile '" + type + "'");
      cfg.conductivity.profile.value = pr.num("value", 1.0);
      cfg.conductivity.profile.rampLow = pr.num("rampLow", 1.0);
      cfg.conductivity.profile.rampHigh = pr.num("rampHigh", 2.0);
      pr.finish();
    }
    if (c.has("bump")) {
      Section b(c.at("bump"), "conductivity.bump");
      std::string shape = b.str("shape", "cosine");
      if (!bump_from_string(shape, cfg.conductivity.bump.shape))
        fail_parse("conductivity.bump.shape", "unknown bump shape '" + shape + "'");
      cfg.conductivity.bump.width = b.num("width", cfg.conductivity.bump.width);
      cfg.conductivity.bump.amplitude =
          b.num("amplitude", cfg.conductivity.bump.amplitude);
      cfg.conductivity.randomCenter = b.boolean("randomCenter", true);
      if (b.has("center")) {
        const json& ctr = b.at("center");
        if (!ctr.is_array() || ctr.size() < 2)
          fail_parse("conductivity.bump.center", "expected an array of coordinates");
        for (size_t i = 0; i < std::min<size_t>(3, ctr.size()); ++i)
          cfg.conductivity.bump.center[i] = ctr[i].get<double>();
        cfg.conductivity.randomCenter = b.boolean("randomCenter", false);
      }
      b.finish();
    }
    c.finish();
  }

  if (top.has("solver")) {
    Section s(top.at("solver"), "solver");
    cfg.solver.tol = s.num("tol", cfg.solver.tol);
    cfg.solver.maxIter = s.integer("max_iter", cfg.solver.maxIter);
    cfg.solver.directMaxUnknowns =
        s.integer("direct_max_unknowns", cfg.solver.directMaxUnknowns);
    s.finish();
  }

  if (top.has("dtn")) {
    Section d(top.at("dtn"), "dtn");
    cfg.dtn.maxDofs = d.integer("max_dofs", cfg.dtn.maxDofs);
    d.finish();
  }

  if (top.has("skernel")) {
    Section k(top.at("skernel"), "skernel");
    cfg.skernel.hFd = k.num("h_fd", cfg.skernel.hFd);
    cfg.skernel.sampleStride = k.integer("sample_stride", cfg.skernel.sampleStride);
    k.finish();
  }

  if (top.has("sweep")) {
    Section s(top.at("sweep"), "sweep");
    cfg.sweep.t0 = s.num("t0", cfg.sweep.t0);
    cfg.sweep.K = s.integer("K", cfg.sweep.K);
    cfg.sweep.withReconstruction =
        s.boolean("with_reconstruction", cfg.sweep.withReconstruction);
    cfg.sweep.propagationFamily =
        s.integer("propagation_family", cfg.sweep.propagationFamily);
    s.finish();
  }

  if (top.has("seed")) {
    const json& v = top.at("seed");
    if (!v.is_number_unsigned() && !v.is_number_integer())
      fail_parse("seed", "expected an integer");
    cfg.seed = v.get<std::uint64_t>();
  }
  cfg.threads = top.integer("threads", cfg.threads);
  top.finish();

  cfg.validate();
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail_parse("config", "cannot open config file " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

void RunConfig::validate() const {
  geometry.validate();
  if (!(conductivity.lambda > 0 && conductivity.lambda < 1))
    throw ValidationError(ErrorKind::Conductivity, "conductivity.lambda",
                          "ellipticity constant must lie in (0, 1)");
  if (conductivity.E <= 0)
    throw ValidationError(ErrorKind::Conductivity, "conductivity.E",
                          "regularity bound must be positive");
  if (conductivity.bump.width <= 0)
    throw ValidationError(ErrorKind::Conductivity, "conductivity.bump.width",
                          "bump width must be positive");
  if (solver.tol <= 0 || solver.tol > 1e-4)
    throw ValidationError(ErrorKind::Solver, "solver.tol",
                          "solver tolerance must lie in (0, 1e-4]");
  if (solver.maxIter < 1)
    throw ValidationError(ErrorKind::Solver, "solver.max_iter",
                          "iteration budget must be positive");
  if (dtn.maxDofs < 1)
    throw ValidationError(ErrorKind::Solver, "dtn.max_dofs",
                          "dof cap must be positive");
  if (skernel.hFd != 0.0 &&
      !(skernel.hFd >= 2 * geometry.h && skernel.hFd <= geometry.rho2 / 4))
    throw ValidationError(ErrorKind::Solver, "skernel.h_fd",
                          "finite-difference step must lie in [2h, rho2/4]");
  if (skernel.sampleStride < 1)
    throw ValidationError(ErrorKind::Solver, "skernel.sample_stride",
                          "sample stride must be positive");
  if (sweep.K < 4)
    throw ValidationError(ErrorKind::Solver, "sweep.K",
                          "need at least 4 dyadic amplitudes");
  if (sweep.t0 <= 0)
    throw ValidationError(ErrorKind::Solver, "sweep.t0",
                          "initial amplitude must be positive");
  if (sweep.propagationFamily < 2)
    throw ValidationError(ErrorKind::Solver, "sweep.propagation_family",
                          "family size must be at least 2");
  if (threads < 1)
    throw ValidationError(ErrorKind::ConfigParse, "threads",
                          "thread count must be positive");
}

std::string default_config_text() {
  return R"({
  "seed": 1,
  "threads": 1,
  "geometry": {
    "dimension": 2,
    "family": "disk",
    "rho0": 0.3,
    "M0": 1.0,
    "d0": 0.3,
    "rho2": 0.16,
    "h1": 0.075,
    "h": 0.015,
    "omegaRadius": 1.0,
    "scaffold": [0.25, 0.45, 0.65],
    "bulgeThickness": 0.35
  },
  "conductivity": {
    "lambda": 0.4,
    "E": 60.0,
    "profile": {"type": "constant", "value": 1.0},
    "bump": {"shape": "cosine", "width": 0.15, "amplitude": 0.3}
  },
  "solver": {"tol": 1e-12, "max_iter": 20000, "direct_max_unknowns": 200000},
  "dtn": {"max_dofs": 2000},
  "skernel": {"h_fd": 0.0, "sample_stride": 8},
  "sweep": {"t0": 0.4, "K": 6, "with_reconstruction": true, "propagation_family": 50}
})";
}

}  // namespace calderon
